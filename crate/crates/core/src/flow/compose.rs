use crate::error::{Error, Result};
use crate::raster::in_bounds;
use crate::scalar::Scalar;

use super::{FlowDirection, FlowField};

/// `a → c` field from chaining `a → b` and `b → c`, with the pixels whose intermediate
/// lookup left frame `b` (sample clamped to the edge) flagged invalid.
#[derive(Clone, Debug)]
pub struct ComposedFlow<T: Scalar> {
    pub field: FlowField<T>,
    pub valid: Vec<bool>,
}

/// `F_ac(q) = F_ab(q) + F_bc(q + F_ab(q))`, with `F_bc` sampled bilinearly.
pub fn compose_flows<T: Scalar>(ab: &FlowField<T>, bc: &FlowField<T>) -> Result<ComposedFlow<T>> {
    bc.check_dims(ab.dims(), "composed flows")?;
    if ab.direction().target != bc.direction().source {
        return Err(Error::Direction(format!(
            "cannot chain {:?} with {:?}",
            ab.direction(),
            bc.direction()
        )));
    }
    let (w, h) = ab.dims();
    let mut valid = Vec::with_capacity(w * h);
    let direction = FlowDirection::new(ab.direction().source, bc.direction().target);
    let field = FlowField::from_fn(w, h, direction, |u, v| {
        let (fx, fy) = ab.get(u, v);
        let x = T::count(u) + fx;
        let y = T::count(v) + fy;
        valid.push(in_bounds(w, h, x, y));
        let (gx, gy) = bc.sample(x, y);
        (fx + gx, fy + gy)
    });
    Ok(ComposedFlow { field, valid })
}
