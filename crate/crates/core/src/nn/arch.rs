use std::ops::Range;

use crate::error::{Error, Result};
use crate::features::{COV_LEN, FEATURE_LEN};

pub const HIDDEN_WIDTH: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Hand-specified layout, used for small test networks.
    Custom,
    DeepNet,
    DeeperNet,
}

impl Variant {
    pub fn tag(self) -> u8 {
        match self {
            Variant::Custom => 0,
            Variant::DeepNet => 1,
            Variant::DeeperNet => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Variant::Custom),
            1 => Some(Variant::DeepNet),
            2 => Some(Variant::DeeperNet),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Custom => "custom",
            Variant::DeepNet => "deepnet",
            Variant::DeeperNet => "deepernet",
        }
    }
}

/// A chain of affine layers with optional PReLU activations and residual
/// shortcuts.
///
/// Node `0` is the network input and node `k` the output of layer `k`.
/// Layer `k` computes `z_k = W_k a_{k-1} + b_k`, applies its own PReLU when
/// `activated[k-1]`, and then adds `prelu(a_from, slopes_s)` for every
/// shortcut `s = (from, k)` landing on it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetArchitecture {
    pub variant: Variant,
    pub widths: Vec<usize>,
    pub activated: Vec<bool>,
    pub shortcuts: Vec<(usize, usize)>,
}

impl NetArchitecture {
    /// 7 affine layers (72 -> 128 x 6 -> 6), 9 PReLUs, 4 shortcuts.
    pub fn deep_net() -> Self {
        Self::residual(Variant::DeepNet, FEATURE_LEN, HIDDEN_WIDTH, COV_LEN, 4)
    }

    /// 11 affine layers, 17 PReLUs, 8 shortcuts.
    pub fn deeper_net() -> Self {
        Self::residual(Variant::DeeperNet, FEATURE_LEN, HIDDEN_WIDTH, COV_LEN, 8)
    }

    pub fn for_variant(variant: Variant) -> Option<Self> {
        match variant {
            Variant::DeepNet => Some(Self::deep_net()),
            Variant::DeeperNet => Some(Self::deeper_net()),
            Variant::Custom => None,
        }
    }

    /// Linear stem, `blocks` residual blocks (affine + PReLU, bridged by a
    /// PReLU shortcut), one more affine + PReLU, and a linear head.
    pub fn residual(variant: Variant, input: usize, hidden: usize, output: usize, blocks: usize) -> Self {
        let layers = blocks + 3;
        let mut widths = vec![input];
        widths.extend(std::iter::repeat_n(hidden, layers - 1));
        widths.push(output);
        let activated = (1..=layers).map(|k| k != 1 && k != layers).collect();
        let shortcuts = (1..=blocks).map(|k| (k, k + 1)).collect();
        Self {
            variant,
            widths,
            activated,
            shortcuts,
        }
    }

    pub fn custom(widths: Vec<usize>, activated: Vec<bool>, shortcuts: Vec<(usize, usize)>) -> Result<Self> {
        let arch = Self {
            variant: Variant::Custom,
            widths,
            activated,
            shortcuts,
        };
        arch.validate()?;
        Ok(arch)
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.len() < 2 || self.widths.contains(&0) {
            return Err(Error::shape("need at least one layer with non-zero widths"));
        }
        if self.activated.len() != self.num_layers() {
            return Err(Error::shape(format!(
                "{} activation flags for {} layers",
                self.activated.len(),
                self.num_layers()
            )));
        }
        for &(from, to) in &self.shortcuts {
            if from >= to || to > self.num_layers() {
                return Err(Error::shape(format!("invalid shortcut span ({from}, {to})")));
            }
            if self.widths[from] != self.widths[to] {
                return Err(Error::shape(format!(
                    "shortcut ({from}, {to}) joins widths {} and {}",
                    self.widths[from], self.widths[to]
                )));
            }
        }
        if let Some(canonical) = Self::for_variant(self.variant) {
            if &canonical != self {
                return Err(Error::shape(format!(
                    "layout does not match the {} variant",
                    self.variant.name()
                )));
            }
        }
        Ok(())
    }

    pub fn num_layers(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn input_width(&self) -> usize {
        self.widths[0]
    }

    pub fn output_width(&self) -> usize {
        self.widths[self.num_layers()]
    }

    pub fn prelu_count(&self) -> usize {
        self.activated.iter().filter(|&&a| a).count() + self.shortcuts.len()
    }

    pub fn layout(&self) -> ParamLayout {
        ParamLayout::new(self)
    }

    pub fn param_count(&self) -> usize {
        self.layout().total
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerSlots {
    pub fan_in: usize,
    pub fan_out: usize,
    /// Row-major `fan_out x fan_in`.
    pub weight: Range<usize>,
    pub bias: Range<usize>,
    pub slope: Option<Range<usize>>,
}

/// Offsets of every tensor in the flat parameter vector. Declaration order
/// is, per layer, weight, bias and trunk slopes (if activated), followed by
/// the shortcut slopes in shortcut order.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamLayout {
    pub layers: Vec<LayerSlots>,
    pub shortcuts: Vec<Range<usize>>,
    pub total: usize,
}

impl ParamLayout {
    fn new(arch: &NetArchitecture) -> Self {
        let mut next = 0;
        let mut take = |n: usize| {
            let r = next..next + n;
            next += n;
            r
        };
        let layers = (0..arch.num_layers())
            .map(|k| {
                let (fan_in, fan_out) = (arch.widths[k], arch.widths[k + 1]);
                LayerSlots {
                    fan_in,
                    fan_out,
                    weight: take(fan_in * fan_out),
                    bias: take(fan_out),
                    slope: arch.activated[k].then(|| take(fan_out)),
                }
            })
            .collect();
        let shortcuts = arch.shortcuts.iter().map(|&(from, _)| take(arch.widths[from])).collect();
        Self {
            layers,
            shortcuts,
            total: next,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deep_net_counts() {
        let a = NetArchitecture::deep_net();
        assert_eq!(a.num_layers(), 7);
        assert_eq!(a.prelu_count(), 9);
        assert_eq!(a.shortcuts.len(), 4);
        assert_eq!(a.widths, vec![72, 128, 128, 128, 128, 128, 128, 6]);
        a.validate().unwrap();
    }

    #[test]
    fn deeper_net_counts() {
        let a = NetArchitecture::deeper_net();
        assert_eq!(a.num_layers(), 11);
        assert_eq!(a.prelu_count(), 17);
        assert_eq!(a.shortcuts.len(), 8);
        a.validate().unwrap();
    }

    #[test]
    fn shortcuts_join_equal_widths() {
        for a in [NetArchitecture::deep_net(), NetArchitecture::deeper_net()] {
            for &(from, to) in &a.shortcuts {
                assert_eq!(a.widths[from], a.widths[to]);
            }
        }
        assert!(NetArchitecture::custom(vec![4, 3, 2], vec![true, false], vec![(0, 1)]).is_err());
    }

    #[test]
    fn layout_is_contiguous() {
        let a = NetArchitecture::deep_net();
        let l = a.layout();
        let mut expected = 0;
        for s in &l.layers {
            assert_eq!(s.weight.start, expected);
            expected = s.slope.as_ref().map_or(s.bias.end, |r| r.end);
        }
        for r in &l.shortcuts {
            assert_eq!(r.start, expected);
            expected = r.end;
        }
        assert_eq!(expected, l.total);
    }

    #[test]
    fn variant_tags_round_trip() {
        for v in [Variant::Custom, Variant::DeepNet, Variant::DeeperNet] {
            assert_eq!(Variant::from_tag(v.tag()), Some(v));
        }
        assert_eq!(Variant::from_tag(9), None);
    }
}
