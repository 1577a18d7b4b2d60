use crate::tensor::{ImageTensor, MaskTensor};
use crate::{Error, Result};

/// Per-image annotations for the three anatomical regions. Regions may
/// overlap; `fish` and `pattern` both lie inside the body.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionMaskSet {
    pub background: MaskTensor,
    pub fish: MaskTensor,
    pub pattern: MaskTensor,
}

impl RegionMaskSet {
    pub fn new(background: MaskTensor, fish: MaskTensor, pattern: MaskTensor) -> Result<Self> {
        if background.shape() != fish.shape() || fish.shape() != pattern.shape() {
            return Err(Error::ShapeMismatch {
                left: format!("{:?}", background.shape()),
                right: format!("{:?} / {:?}", fish.shape(), pattern.shape()),
            });
        }
        Ok(Self { background, fish, pattern })
    }

    pub fn get(&self, region: Region) -> &MaskTensor {
        match region {
            Region::Background => &self.background,
            Region::Fish => &self.fish,
            Region::Pattern => &self.pattern,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.background.shape()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Region {
    Background,
    Fish,
    Pattern,
}

impl Region {
    pub const ALL: [Region; 3] = [Region::Background, Region::Fish, Region::Pattern];

    pub fn name(self) -> &'static str {
        match self {
            Region::Background => "background",
            Region::Fish => "fish",
            Region::Pattern => "pattern",
        }
    }
}

/// Which pixels stay visible under an ablation condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AblationCondition {
    /// Only this region is kept.
    Only(Region),
    /// Everything except this region is kept.
    Without(Region),
    /// Nothing is hidden.
    All,
}

impl AblationCondition {
    /// Column order of the ablation table.
    pub const ALL: [AblationCondition; 7] = [
        AblationCondition::Only(Region::Background),
        AblationCondition::Only(Region::Fish),
        AblationCondition::Only(Region::Pattern),
        AblationCondition::Without(Region::Background),
        AblationCondition::Without(Region::Fish),
        AblationCondition::Without(Region::Pattern),
        AblationCondition::All,
    ];

    pub fn name(self) -> String {
        match self {
            AblationCondition::Only(r) => r.name().to_string(),
            AblationCondition::Without(r) => format!("no_{}", r.name()),
            AblationCondition::All => "all".to_string(),
        }
    }

    /// Pixels kept visible.
    pub fn visible(self, regions: &RegionMaskSet) -> MaskTensor {
        match self {
            AblationCondition::Only(r) => regions.get(r).clone(),
            AblationCondition::Without(r) => regions.get(r).complement(),
            AblationCondition::All => {
                let (h, w) = regions.shape();
                MaskTensor::ones(h, w)
            }
        }
    }
}

impl std::str::FromStr for AblationCondition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AblationCondition::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown ablation condition `{s}`")))
    }
}

/// Zeroes every pixel the condition hides; visible pixels are copied exactly.
pub fn region_ablate(image: &ImageTensor, regions: &RegionMaskSet, condition: AblationCondition) -> Result<ImageTensor> {
    let (h, w, c) = image.shape();
    if regions.shape() != (h, w) {
        return Err(Error::ShapeMismatch {
            left: format!("image {h}x{w}"),
            right: format!("regions {:?}", regions.shape()),
        });
    }
    let visible = condition.visible(regions);
    Ok(ImageTensor::from_fn(h, w, c, |y, x, ch| {
        if visible.get(y, x) {
            image.get(y, x, ch)
        } else {
            0.0
        }
    }))
}
