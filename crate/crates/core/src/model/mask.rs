use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};

/// Reserved label id meaning "no supervision at this pixel".
pub const VOID_ID: u8 = 255;

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub enum MaskKind {
    #[default]
    Semantic,
    /// Instance ids with their class ids. Every non-void pixel id must be a key.
    Instance { class_of_instance: BTreeMap<u8, u8> },
}

/// Row-major raster of 8-bit label ids. Pixel `(u, v)` is column `u`, row `v`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelMask {
    width: usize,
    height: usize,
    data: Vec<u8>,
    kind: MaskKind,
}

impl LabelMask {
    pub fn new(width: usize, height: usize, data: Vec<u8>, kind: MaskKind) -> Result<Self> {
        if width * height != data.len() {
            return Err(Error::LengthMismatch(format!(
                "mask {width}x{height} needs {} values, got {}",
                width * height,
                data.len()
            )));
        }
        if let MaskKind::Instance { class_of_instance } = &kind {
            if class_of_instance.contains_key(&VOID_ID)
                || class_of_instance.values().any(|&c| c == VOID_ID)
            {
                return Err(Error::InvalidData("void id used as instance or class".into()));
            }
            if let Some(&bad) = data
                .iter()
                .find(|&&id| id != VOID_ID && !class_of_instance.contains_key(&id))
            {
                return Err(Error::InvalidData(format!("instance id {bad} has no class")));
            }
        }
        Ok(LabelMask { width, height, data, kind })
    }

    pub fn semantic(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        Self::new(width, height, data, MaskKind::Semantic)
    }

    pub fn filled(width: usize, height: usize, id: u8, kind: MaskKind) -> Result<Self> {
        Self::new(width, height, vec![id; width * height], kind)
    }

    pub fn all_void(width: usize, height: usize, kind: MaskKind) -> Self {
        LabelMask { width, height, data: vec![VOID_ID; width * height], kind }
    }

    /// Same size and kind as `self`, new pixel data.
    pub fn with_data(&self, data: Vec<u8>) -> Result<Self> {
        Self::new(self.width, self.height, data, self.kind.clone())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn kind(&self) -> &MaskKind {
        &self.kind
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> u8 {
        self.data[v * self.width + u]
    }

    /// Class id of a raw label id, `None` for void.
    pub fn class_of(&self, id: u8) -> Option<u8> {
        if id == VOID_ID {
            return None;
        }
        match &self.kind {
            MaskKind::Semantic => Some(id),
            MaskKind::Instance { class_of_instance } => class_of_instance.get(&id).copied(),
        }
    }

    /// Distinct non-void ids present in the raster.
    pub fn label_ids(&self) -> BTreeSet<u8> {
        self.data.iter().copied().filter(|&id| id != VOID_ID).collect()
    }

    pub fn void_count(&self) -> usize {
        self.data.iter().filter(|&&id| id == VOID_ID).count()
    }

    pub fn is_instance(&self) -> bool {
        matches!(self.kind, MaskKind::Instance { .. })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn length_must_match() {
        assert!(LabelMask::semantic(2, 2, vec![0; 3]).is_err());
    }

    #[test]
    fn instance_ids_need_classes() {
        let map: BTreeMap<u8, u8> = [(1, 4)].into_iter().collect();
        let ok = LabelMask::new(2, 1, vec![1, VOID_ID], MaskKind::Instance { class_of_instance: map.clone() });
        assert!(ok.is_ok());
        assert_eq!(ok.unwrap().class_of(1), Some(4));
        let bad = LabelMask::new(2, 1, vec![1, 2], MaskKind::Instance { class_of_instance: map });
        assert!(bad.is_err());
    }

    #[test]
    fn void_has_no_class() {
        let m = LabelMask::semantic(1, 1, vec![VOID_ID]).unwrap();
        assert_eq!(m.class_of(VOID_ID), None);
        assert!(m.label_ids().is_empty());
    }
}
