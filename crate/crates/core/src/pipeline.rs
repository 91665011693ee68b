//! NUC followed by SR, as one forward pass.

use crate::error::{contract, Error, Result};
use crate::graph::{Graph, Var};
use crate::grid::{GrayFrame, Grid2D, Unit};
use crate::nuc::{MultiNucNet, PreparedFrames, SingleNucNet};
use crate::simulator::{AmbientTemperature, Burst};
use crate::sr::SrNet;
use crate::tensor::{Real, Tensor3};
use crate::weights::WeightStore;

/// Raw camera input of one pipeline run.
#[derive(Clone, Debug, PartialEq)]
pub enum NucInput {
    Frame(GrayFrame),
    Burst(Burst),
}

impl NucInput {
    /// Reference frame (frame 0 of a burst).
    pub fn reference(&self) -> &GrayFrame {
        match self {
            Self::Frame(f) => f,
            Self::Burst(b) => &b.frames[0],
        }
    }

    pub fn frames(&self) -> &[GrayFrame] {
        match self {
            Self::Frame(f) => std::slice::from_ref(f),
            Self::Burst(b) => &b.frames,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        self.reference().dims()
    }
}

/// Either NUC network, chosen by the weights it is loaded from.
#[derive(Clone, Debug, PartialEq)]
pub enum NucStage {
    Single(SingleNucNet),
    Multi(MultiNucNet),
}

/// Graph nodes produced by a NUC stage.
#[derive(Clone, Copy, Debug)]
pub struct NucVars {
    pub temperature: Var,
    /// Scene-mean estimate in network units (multiframe only).
    pub mean: Option<Var>,
}

impl NucStage {
    pub fn from_weights<R: Real>(store: &WeightStore<R>) -> Result<Self> {
        if store.get("trunk.0.weight").is_some() {
            Ok(Self::Single(SingleNucNet::from_weights(store)?))
        } else if store.get("kernel.trunk.0.weight").is_some() {
            Ok(Self::Multi(MultiNucNet::from_weights(store)?))
        } else {
            Err(Error::Load("weights hold neither a single-frame nor a multiframe NUC net".into()))
        }
    }

    pub fn is_multi(&self) -> bool {
        matches!(self, Self::Multi(_))
    }

    /// Frames handed to [`Self::forward`]: the reference frame for the single
    /// net, the burst with its registration shifts for the multiframe net.
    pub fn prepare(&self, input: &NucInput) -> Result<PreparedFrames> {
        match (self, input) {
            (Self::Single(_), _) => Ok(PreparedFrames::single(input.reference().clone())),
            (Self::Multi(net), NucInput::Burst(b)) => net.prepare(b),
            (Self::Multi(_), NucInput::Frame(f)) => Ok(PreparedFrames::single(f.clone())),
        }
    }

    pub fn forward<R: Real>(
        &self,
        g: &mut Graph<R>,
        set: usize,
        frames: &PreparedFrames,
        t_amb: AmbientTemperature,
    ) -> Result<NucVars> {
        match self {
            Self::Single(net) => {
                let f = frames.frames.first().ok_or_else(|| contract("no input frame"))?;
                Ok(NucVars { temperature: net.forward(g, set, f, t_amb)?.temperature, mean: None })
            }
            Self::Multi(net) => {
                let out = net.forward(g, set, frames, t_amb)?;
                Ok(NucVars { temperature: out.temperature, mean: Some(out.mean) })
            }
        }
    }
}

/// Graph nodes of a full pipeline pass.
#[derive(Clone, Copy, Debug)]
pub struct PipelineVars {
    pub nuc: NucVars,
    pub sr: Var,
}

/// NUC reading graph set 0, SR reading graph set 1.
#[derive(Clone, Debug, PartialEq)]
pub struct Pipeline {
    pub nuc: NucStage,
    pub sr: SrNet,
}

impl Pipeline {
    pub const NUC_SET: usize = 0;
    pub const SR_SET: usize = 1;

    pub fn from_weights<R: Real>(nuc: &WeightStore<R>, sr: &WeightStore<R>) -> Result<Self> {
        Ok(Self { nuc: NucStage::from_weights(nuc)?, sr: SrNet::from_weights(sr)? })
    }

    pub fn scale(&self) -> usize {
        self.sr.scale()
    }

    pub fn forward<R: Real>(
        &self,
        g: &mut Graph<R>,
        frames: &PreparedFrames,
        t_amb: AmbientTemperature,
    ) -> Result<PipelineVars> {
        let nuc = self.nuc.forward(g, Self::NUC_SET, frames, t_amb)?;
        let sr = self.sr.forward(g, Self::SR_SET, nuc.temperature)?;
        Ok(PipelineVars { nuc, sr })
    }
}

/// Both stages' outputs, °C.
#[derive(Clone, Debug, PartialEq)]
pub struct PipelineOutput {
    pub nuc: Grid2D,
    pub sr: Grid2D,
}

fn finite_grid<R: Real>(t: &Tensor3<R>, what: &str) -> Result<Grid2D> {
    if !t.all_finite() {
        return Err(contract(format!("{what} produced non-finite temperatures")));
    }
    Ok(t.to_grid(0, Unit::Celsius))
}

/// Temperature at the input resolution.
pub fn run_nuc(input: &NucInput, t_amb: AmbientTemperature, nuc: &WeightStore) -> Result<Grid2D> {
    let stage = NucStage::from_weights(nuc)?;
    let frames = stage.prepare(input)?;
    let mut g = Graph::new(vec![nuc]);
    let out = stage.forward(&mut g, 0, &frames, t_amb)?;
    finite_grid(g.value(out.temperature), "NUC")
}

/// NUC then SR.
pub fn run_pipeline(
    input: &NucInput,
    t_amb: AmbientTemperature,
    nuc: &WeightStore,
    sr: &WeightStore,
) -> Result<PipelineOutput> {
    let p = Pipeline::from_weights(nuc, sr)?;
    let frames = p.nuc.prepare(input)?;
    let mut g = Graph::new(vec![nuc, sr]);
    let out = p.forward(&mut g, &frames, t_amb)?;
    Ok(PipelineOutput {
        nuc: finite_grid(g.value(out.nuc.temperature), "NUC")?,
        sr: finite_grid(g.value(out.sr), "SR")?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nuc::SingleNucConfig;
    use crate::ops::bicubic_resample;
    use crate::sr::SrConfig;

    #[test]
    fn zero_sr_upscales_nuc_output() {
        let nuc =
            SingleNucNet::new(SingleNucConfig { depth: 1, width: 2, ..Default::default() }).unwrap().identity_weights();
        let sr = SrNet::new(SrConfig { scale: 4, channels: 16, blocks: 1 }).unwrap().zero_weights();
        let f = GrayFrame::new(3, 4, (0..12).map(|v| 20 + v).collect(), Some(21.0)).unwrap();
        let amb = AmbientTemperature::new(21.0).unwrap();
        let out = run_pipeline(&NucInput::Frame(f.clone()), amb, &nuc, &sr).unwrap();
        assert_eq!(out.sr.dims(), (12, 16));
        assert_eq!(out.sr, bicubic_resample(&out.nuc, 4.0).unwrap());
        assert_eq!(run_nuc(&NucInput::Frame(f), amb, &nuc).unwrap(), out.nuc);
        assert!(NucStage::from_weights(&sr).is_err());
    }
}
