use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, Matrix};
use crate::rng::{self, Stream};

/// Hidden width of the default η sub-network.
pub const DEFAULT_ETA_WIDTH: usize = 32;
/// Hidden width of the ζ bias network.
pub const DEFAULT_ZETA_WIDTH: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    /// `out × in`
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        DenseLayer {
            weight: Matrix::zeros(outputs, inputs),
            bias: vec![0.0; outputs],
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.cols()
    }

    pub fn outputs(&self) -> usize {
        self.weight.rows()
    }

    fn validate(&self, field: &str) -> Result<()> {
        if self.bias.len() != self.weight.rows() {
            return Err(Error::invalid(
                field,
                format!(
                    "bias has {} entries for {} units",
                    self.bias.len(),
                    self.weight.rows()
                ),
            ));
        }
        Ok(())
    }
}

/// ReLU sub-network: hidden layers followed by a bias-free output row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaParams {
    pub layers: Vec<DenseLayer>,
    pub out_weight: Vec<f64>,
}

/// Tanh bias network over activation patterns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZetaParams {
    pub hidden: DenseLayer,
    pub out_weight: Vec<f64>,
    pub out_bias: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// η plus the pattern-conditioned bias ζ.
    Delu,
    /// Plain ReLU network: η plus one scalar output bias.
    Relu,
    /// η restricted to be concave, plus ζ.
    Concave,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Delu => "delu",
            Variant::Relu => "relu",
            Variant::Concave => "concave",
        }
    }

    fn uses_zeta(self) -> bool {
        !matches!(self, Variant::Relu)
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "delu" => Ok(Variant::Delu),
            "relu" => Ok(Variant::Relu),
            "concave" => Ok(Variant::Concave),
            other => Err(Error::Argument(format!(
                "unknown variant `{other}` (expected delu, relu or concave)"
            ))),
        }
    }
}

/// On/off state of every hidden unit, layer by layer.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActivationPattern(Vec<bool>);

impl ActivationPattern {
    pub fn new(bits: Vec<bool>) -> Self {
        ActivationPattern(bits)
    }

    pub fn zeros(n: usize) -> Self {
        ActivationPattern(vec![false; n])
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn count_active(&self) -> usize {
        self.0.iter().filter(|b| **b).count()
    }
}

/// Exact affine description of η on one activation region.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinePieceMap {
    /// Per hidden layer: pre-activations equal `m·f + z` on the region.
    pub layers: Vec<PieceLayer>,
    /// `η(f) = gradient·f + offset` on the region.
    pub gradient: Vec<f64>,
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PieceLayer {
    pub m: Matrix,
    pub z: Vec<f64>,
    /// `+1` for active units, `−1` for inactive ones; the region is
    /// `sign_i (m_i·f + z_i) ≥ 0` for every unit.
    pub signs: Vec<f64>,
}

impl AffinePieceMap {
    /// Iterates over the region's half-spaces as `(normal, offset)` with
    /// `normal·f + offset ≥ 0` inside.
    pub fn half_spaces(&self) -> impl Iterator<Item = (Vec<f64>, f64)> + '_ {
        self.layers.iter().flat_map(|layer| {
            layer.signs.iter().enumerate().map(move |(i, &s)| {
                let normal = layer.m.row(i).iter().map(|v| s * v).collect();
                (normal, s * layer.z[i])
            })
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forward {
    pub value: f64,
    pub pattern: ActivationPattern,
}

/// Gradients with the same layout as the network's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub eta: EtaParams,
    pub zeta: ZetaParams,
    pub scalar_out_bias: f64,
    pub input: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Checkpoint")]
pub struct DeluNetwork {
    pub variant: Variant,
    pub eta: EtaParams,
    pub zeta: ZetaParams,
    /// Output bias of the plain ReLU variant; unused otherwise.
    pub scalar_out_bias: f64,
}

#[derive(Deserialize)]
struct Checkpoint {
    variant: Variant,
    eta: EtaParams,
    zeta: ZetaParams,
    scalar_out_bias: f64,
}

impl TryFrom<Checkpoint> for DeluNetwork {
    type Error = Error;

    fn try_from(c: Checkpoint) -> Result<Self> {
        DeluNetwork::new(c.variant, c.eta, c.zeta, c.scalar_out_bias)
    }
}

/// Layer caches from one forward pass.
struct Trace {
    /// `inputs[l]` feeds hidden layer `l`; the last entry feeds the output row.
    inputs: Vec<Vec<f64>>,
    pattern: ActivationPattern,
    eta: f64,
}

impl DeluNetwork {
    pub fn new(variant: Variant, eta: EtaParams, zeta: ZetaParams, scalar_out_bias: f64) -> Result<Self> {
        if eta.layers.is_empty() {
            return Err(Error::invalid("eta.layers", "at least one hidden layer is required"));
        }
        let mut width = eta.layers[0].inputs();
        if width == 0 {
            return Err(Error::invalid("eta.layers[0]", "input width must be positive"));
        }
        for (l, layer) in eta.layers.iter().enumerate() {
            layer.validate(&format!("eta.layers[{l}]"))?;
            if layer.inputs() != width {
                return Err(Error::invalid(
                    format!("eta.layers[{l}]"),
                    format!("takes {} inputs but the previous layer has {width} units", layer.inputs()),
                ));
            }
            width = layer.outputs();
        }
        if eta.out_weight.len() != width {
            return Err(Error::invalid(
                "eta.out_weight",
                format!("has {} entries for {width} final hidden units", eta.out_weight.len()),
            ));
        }
        let n_hidden: usize = eta.layers.iter().map(DenseLayer::outputs).sum();
        zeta.hidden.validate("zeta.hidden")?;
        if zeta.hidden.inputs() != n_hidden {
            return Err(Error::invalid(
                "zeta.hidden",
                format!("takes {} inputs but eta has {n_hidden} hidden units", zeta.hidden.inputs()),
            ));
        }
        if zeta.out_weight.len() != zeta.hidden.outputs() {
            return Err(Error::invalid(
                "zeta.out_weight",
                format!("has {} entries for {} units", zeta.out_weight.len(), zeta.hidden.outputs()),
            ));
        }
        let finite = eta
            .layers
            .iter()
            .chain(std::iter::once(&zeta.hidden))
            .flat_map(|l| l.weight.data().iter().chain(&l.bias))
            .chain(&eta.out_weight)
            .chain(&zeta.out_weight)
            .chain([&zeta.out_bias, &scalar_out_bias])
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::invalid("parameters", "all weights must be finite"));
        }
        Ok(DeluNetwork {
            variant,
            eta,
            zeta,
            scalar_out_bias,
        })
    }

    /// Default architecture: one hidden layer of 32 ReLU units, ζ with 512
    /// tanh units. Weights are uniform in `±1/√fan_in`, biases zero.
    pub fn init(m: usize, variant: Variant, seed: u64) -> Result<Self> {
        Self::init_with(m, &[DEFAULT_ETA_WIDTH], DEFAULT_ZETA_WIDTH, variant, seed)
    }

    pub fn init_with(m: usize, hidden: &[usize], zeta_width: usize, variant: Variant, seed: u64) -> Result<Self> {
        if m == 0 {
            return Err(Error::Argument("network input width must be positive".into()));
        }
        if hidden.is_empty() || hidden.contains(&0) || zeta_width == 0 {
            return Err(Error::Argument(format!(
                "layer widths must be positive (eta {hidden:?}, zeta {zeta_width})"
            )));
        }
        let mut rng = rng::stream(seed, Stream::Init, 0);
        let mut fill = |rows: usize, cols: usize| -> Matrix {
            let bound = 1.0 / (cols as f64).sqrt();
            let data = (0..rows * cols).map(|_| rng::uniform(&mut rng, -bound, bound)).collect();
            Matrix::from_vec(rows, cols, data).expect("shape matches")
        };
        let mut layers = Vec::with_capacity(hidden.len());
        let mut width = m;
        for &units in hidden {
            layers.push(DenseLayer {
                weight: fill(units, width),
                bias: vec![0.0; units],
            });
            width = units;
        }
        let out_weight = fill(1, width).data().to_vec();
        let n_hidden: usize = hidden.iter().sum();
        let zeta = ZetaParams {
            hidden: DenseLayer {
                weight: fill(zeta_width, n_hidden),
                bias: vec![0.0; zeta_width],
            },
            out_weight: fill(1, zeta_width).data().to_vec(),
            out_bias: 0.0,
        };
        Self::new(variant, EtaParams { layers, out_weight }, zeta, 0.0)
    }

    pub fn n_inputs(&self) -> usize {
        self.eta.layers[0].inputs()
    }

    /// Total number of hidden units in η (the pattern length).
    pub fn n_hidden(&self) -> usize {
        self.eta.layers.iter().map(DenseLayer::outputs).sum()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_inputs() {
            return Err(Error::Argument(format!(
                "input has {} entries, network expects {}",
                x.len(),
                self.n_inputs()
            )));
        }
        Ok(())
    }

    fn check_pattern(&self, pattern: &ActivationPattern) -> Result<()> {
        if pattern.len() != self.n_hidden() {
            return Err(Error::Argument(format!(
                "pattern has {} bits, network has {} hidden units",
                pattern.len(),
                self.n_hidden()
            )));
        }
        Ok(())
    }

    /// Weight actually applied by hidden layer `l` (concave: `|W|` past the
    /// first layer).
    fn effective_weight(&self, l: usize, i: usize, j: usize) -> f64 {
        let w = self.eta.layers[l].weight.get(i, j);
        if self.variant == Variant::Concave && l > 0 {
            w.abs()
        } else {
            w
        }
    }

    fn effective_out(&self, i: usize) -> f64 {
        let w = self.eta.out_weight[i];
        if self.variant == Variant::Concave {
            -w.abs()
        } else {
            w
        }
    }

    fn trace(&self, x: &[f64]) -> Trace {
        let mut inputs = Vec::with_capacity(self.eta.layers.len() + 1);
        let mut bits = Vec::with_capacity(self.n_hidden());
        let mut h = x.to_vec();
        for (l, layer) in self.eta.layers.iter().enumerate() {
            let mut next = Vec::with_capacity(layer.outputs());
            for i in 0..layer.outputs() {
                let pre = if self.variant == Variant::Concave && l > 0 {
                    layer.weight.row(i).iter().zip(&h).map(|(w, v)| w.abs() * v).sum::<f64>()
                } else {
                    dot(layer.weight.row(i), &h)
                } + layer.bias[i];
                let on = pre > 0.0;
                bits.push(on);
                next.push(if on { pre } else { 0.0 });
            }
            inputs.push(std::mem::replace(&mut h, next));
        }
        let eta = (0..h.len()).map(|i| self.effective_out(i) * h[i]).sum();
        inputs.push(h);
        Trace {
            inputs,
            pattern: ActivationPattern(bits),
            eta,
        }
    }

    /// `η(f)` alone.
    pub fn eta_value(&self, x: &[f64]) -> Result<f64> {
        self.check_input(x)?;
        Ok(self.trace(x).eta)
    }

    /// η of the concave variant: `−|W_out| · ReLU(… |W_2| ReLU(W_1 f + b_1) …)`.
    pub fn concave_eta(&self, x: &[f64]) -> Result<f64> {
        if self.variant != Variant::Concave {
            return Err(Error::Argument(format!(
                "concave evaluation requested on a {} network",
                self.variant
            )));
        }
        self.eta_value(x)
    }

    fn zeta_hidden(&self, pattern: &ActivationPattern) -> Vec<f64> {
        let zeta = &self.zeta.hidden;
        let mask: Vec<f64> = pattern.bits().iter().map(|&on| if on { 1.0 } else { 0.0 }).collect();
        (0..zeta.outputs())
            .map(|j| (dot(zeta.weight.row(j), &mask) + zeta.bias[j]).tanh())
            .collect()
    }

    /// Output bias for a region: `ζ(r)` for the DeLU variants, the scalar
    /// bias for the plain ReLU network.
    pub fn piece_bias(&self, pattern: &ActivationPattern) -> Result<f64> {
        self.check_pattern(pattern)?;
        Ok(self.piece_bias_unchecked(pattern))
    }

    pub(crate) fn piece_bias_unchecked(&self, pattern: &ActivationPattern) -> f64 {
        if self.variant.uses_zeta() {
            dot(&self.zeta.out_weight, &self.zeta_hidden(pattern)) + self.zeta.out_bias
        } else {
            self.scalar_out_bias
        }
    }

    /// `ξ(f) = η(f) + bias(r(f))` together with the pattern `r(f)`. A unit is
    /// on iff its pre-activation is strictly positive.
    pub fn forward(&self, x: &[f64]) -> Result<Forward> {
        self.check_input(x)?;
        let trace = self.trace(x);
        let value = trace.eta + self.piece_bias_unchecked(&trace.pattern);
        Ok(Forward {
            value,
            pattern: trace.pattern,
        })
    }

    /// η's value and pattern without the bias network; cheap enough for
    /// inner loops that cache biases per pattern.
    pub(crate) fn eta_and_pattern(&self, x: &[f64]) -> (f64, ActivationPattern) {
        let t = self.trace(x);
        (t.eta, t.pattern)
    }

    /// Affine form of η on the region with activation `pattern`.
    pub fn region_affine_map(&self, pattern: &ActivationPattern) -> Result<AffinePieceMap> {
        self.check_pattern(pattern)?;
        let m = self.n_inputs();
        let mut layers: Vec<PieceLayer> = Vec::with_capacity(self.eta.layers.len());
        let mut offset_bit = 0;
        // running affine map of the previous layer's (masked) output
        let mut prev_m = Matrix::zeros(m, m);
        for i in 0..m {
            prev_m.set(i, i, 1.0);
        }
        let mut prev_z = vec![0.0; m];
        for (l, layer) in self.eta.layers.iter().enumerate() {
            let units = layer.outputs();
            let mut lm = Matrix::zeros(units, m);
            let mut lz = layer.bias.clone();
            for i in 0..units {
                let row = lm.row_mut(i);
                for k in 0..layer.inputs() {
                    let w = self.effective_weight(l, i, k);
                    if w != 0.0 {
                        axpy(w, prev_m.row(k), row);
                        lz[i] += w * prev_z[k];
                    }
                }
            }
            let bits = &pattern.bits()[offset_bit..offset_bit + units];
            offset_bit += units;
            let signs = bits.iter().map(|&on| if on { 1.0 } else { -1.0 }).collect();
            // R^(l): zero the rows of inactive units
            let mut masked_m = lm.clone();
            let mut masked_z = lz.clone();
            for (i, &on) in bits.iter().enumerate() {
                if !on {
                    masked_m.row_mut(i).iter_mut().for_each(|v| *v = 0.0);
                    masked_z[i] = 0.0;
                }
            }
            layers.push(PieceLayer { m: lm, z: lz, signs });
            prev_m = masked_m;
            prev_z = masked_z;
        }
        let mut gradient = vec![0.0; m];
        let mut offset = 0.0;
        for i in 0..prev_m.rows() {
            let w = self.effective_out(i);
            axpy(w, prev_m.row(i), &mut gradient);
            offset += w * prev_z[i];
        }
        Ok(AffinePieceMap {
            layers,
            gradient,
            offset,
        })
    }

    /// Reverse-mode gradient of `upstream · ξ(x)` with respect to every
    /// parameter and the input. The pattern is treated as a constant, so no
    /// gradient reaches η through ζ's input.
    pub fn backward(&self, x: &[f64], upstream: f64) -> Result<Gradients> {
        self.check_input(x)?;
        let trace = self.trace(x);
        let mut grads = self.zero_gradients();
        self.accumulate_eta_grad(&trace, upstream, &mut grads);
        self.accumulate_bias_grad(&trace.pattern, upstream, &mut grads);
        Ok(grads)
    }

    pub fn zero_gradients(&self) -> Gradients {
        Gradients {
            eta: EtaParams {
                layers: self
                    .eta
                    .layers
                    .iter()
                    .map(|l| DenseLayer::zeros(l.inputs(), l.outputs()))
                    .collect(),
                out_weight: vec![0.0; self.eta.out_weight.len()],
            },
            zeta: ZetaParams {
                hidden: DenseLayer::zeros(self.zeta.hidden.inputs(), self.zeta.hidden.outputs()),
                out_weight: vec![0.0; self.zeta.out_weight.len()],
                out_bias: 0.0,
            },
            scalar_out_bias: 0.0,
            input: vec![0.0; self.n_inputs()],
        }
    }

    /// Adds `upstream · ∂η/∂θ` and `upstream · ∂η/∂x` into `grads`.
    fn accumulate_eta_grad(&self, trace: &Trace, upstream: f64, grads: &mut Gradients) {
        let n_layers = self.eta.layers.len();
        let concave = self.variant == Variant::Concave;
        let last = &trace.inputs[n_layers];
        for (i, g) in grads.eta.out_weight.iter_mut().enumerate() {
            let d_eff = upstream * last[i];
            *g += if concave {
                -signum0(self.eta.out_weight[i]) * d_eff
            } else {
                d_eff
            };
        }
        // delta over the final hidden layer's pre-activations
        let mut offset_bit = self.n_hidden();
        let mut delta: Vec<f64> = (0..last.len()).map(|i| upstream * self.effective_out(i)).collect();
        for l in (0..n_layers).rev() {
            let layer = &self.eta.layers[l];
            offset_bit -= layer.outputs();
            let bits = &trace.pattern.bits()[offset_bit..offset_bit + layer.outputs()];
            for (d, &on) in delta.iter_mut().zip(bits) {
                if !on {
                    *d = 0.0;
                }
            }
            let input = &trace.inputs[l];
            let g_layer = &mut grads.eta.layers[l];
            let abs_weights = concave && l > 0;
            for (i, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                g_layer.bias[i] += d;
                let w_row = layer.weight.row(i);
                for (k, g) in g_layer.weight.row_mut(i).iter_mut().enumerate() {
                    let d_eff = d * input[k];
                    *g += if abs_weights { signum0(w_row[k]) * d_eff } else { d_eff };
                }
            }
            let mut next = vec![0.0; layer.inputs()];
            for (i, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                for (k, n) in next.iter_mut().enumerate() {
                    *n += d * self.effective_weight(l, i, k);
                }
            }
            delta = next;
        }
        for (g, d) in grads.input.iter_mut().zip(&delta) {
            *g += d;
        }
    }

    /// Adds `upstream · ∂bias/∂θ` for the region `pattern`.
    fn accumulate_bias_grad(&self, pattern: &ActivationPattern, upstream: f64, grads: &mut Gradients) {
        if !self.variant.uses_zeta() {
            grads.scalar_out_bias += upstream;
            return;
        }
        self.accumulate_zeta_grad(pattern, &self.zeta_hidden(pattern), upstream, grads);
    }

    fn accumulate_zeta_grad(&self, pattern: &ActivationPattern, hidden: &[f64], upstream: f64, grads: &mut Gradients) {
        grads.zeta.out_bias += upstream;
        for (j, &t) in hidden.iter().enumerate() {
            grads.zeta.out_weight[j] += upstream * t;
            let ds = upstream * self.zeta.out_weight[j] * (1.0 - t * t);
            if ds == 0.0 {
                continue;
            }
            grads.zeta.hidden.bias[j] += ds;
            for (g, &on) in grads.zeta.hidden.weight.row_mut(j).iter_mut().zip(pattern.bits()) {
                if on {
                    *g += ds;
                }
            }
        }
    }

    /// Gradient of `Σ_i u_i · ξ(x_i)` over a batch, where the weight
    /// `u_i = upstream(i, ξ(x_i))` may depend on the sample's output. ζ is
    /// evaluated once per distinct pattern and receives the summed weight of
    /// that pattern, which is exact because the bias is constant on a region.
    /// Returns the outputs `ξ(x_i)`.
    pub(crate) fn batch_gradient(
        &self,
        xs: &[&[f64]],
        upstream: impl Fn(usize, f64) -> f64,
        grads: &mut Gradients,
    ) -> Vec<f64> {
        let uses_zeta = self.variant.uses_zeta();
        let zeta = &self.zeta.hidden;
        let (width, n_bits) = (zeta.outputs(), zeta.inputs());
        // ζ's weight transposed so that each input bit owns a contiguous column
        let mut wt = vec![0.0; if uses_zeta { width * n_bits } else { 0 }];
        if uses_zeta {
            for j in 0..width {
                for (i, w) in zeta.weight.row(j).iter().enumerate() {
                    wt[i * width + j] = *w;
                }
            }
        }
        let active = |p: &ActivationPattern| p.bits().iter().enumerate().filter(|(_, on)| **on).map(|(i, _)| i).collect::<Vec<_>>();

        struct Group {
            active: Vec<usize>,
            hidden: Vec<f64>,
            bias: f64,
            upstream: f64,
        }
        let mut groups: Vec<Group> = Vec::new();
        let mut index: std::collections::HashMap<&ActivationPattern, usize> = std::collections::HashMap::new();
        let traces: Vec<Trace> = xs.iter().map(|x| self.trace(x)).collect();
        let mut group_of = Vec::with_capacity(xs.len());
        for trace in &traces {
            let k = *index.entry(&trace.pattern).or_insert_with(|| {
                let on = active(&trace.pattern);
                let (hidden, bias) = if uses_zeta {
                    let mut pre = zeta.bias.clone();
                    for &i in &on {
                        for (p, w) in pre.iter_mut().zip(&wt[i * width..(i + 1) * width]) {
                            *p += w;
                        }
                    }
                    let hidden: Vec<f64> = pre.into_iter().map(f64::tanh).collect();
                    let bias = dot(&self.zeta.out_weight, &hidden) + self.zeta.out_bias;
                    (hidden, bias)
                } else {
                    (Vec::new(), self.scalar_out_bias)
                };
                groups.push(Group {
                    active: on,
                    hidden,
                    bias,
                    upstream: 0.0,
                });
                groups.len() - 1
            });
            group_of.push(k);
        }
        let mut values = Vec::with_capacity(xs.len());
        for (i, (trace, &k)) in traces.iter().zip(&group_of).enumerate() {
            let value = trace.eta + groups[k].bias;
            let g = upstream(i, value);
            self.accumulate_eta_grad(trace, g, grads);
            groups[k].upstream += g;
            values.push(value);
        }
        if !uses_zeta {
            grads.scalar_out_bias += groups.iter().map(|g| g.upstream).sum::<f64>();
            return values;
        }
        let mut gt = vec![0.0; width * n_bits];
        let mut ds = vec![0.0; width];
        for group in &groups {
            let u = group.upstream;
            grads.zeta.out_bias += u;
            for (j, &t) in group.hidden.iter().enumerate() {
                grads.zeta.out_weight[j] += u * t;
                ds[j] = u * self.zeta.out_weight[j] * (1.0 - t * t);
                grads.zeta.hidden.bias[j] += ds[j];
            }
            for &i in &group.active {
                for (g, d) in gt[i * width..(i + 1) * width].iter_mut().zip(&ds) {
                    *g += d;
                }
            }
        }
        for j in 0..width {
            for (i, g) in grads.zeta.hidden.weight.row_mut(j).iter_mut().enumerate() {
                *g += gt[i * width + j];
            }
        }
        values
    }

    /// Parameters as mutable slices, in a fixed order shared with
    /// [`Gradients::param_slices`].
    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for layer in &mut self.eta.layers {
            out.push(layer.weight.data_mut());
            out.push(&mut layer.bias);
        }
        out.push(&mut self.eta.out_weight);
        out.push(self.zeta.hidden.weight.data_mut());
        out.push(&mut self.zeta.hidden.bias);
        out.push(&mut self.zeta.out_weight);
        out.push(std::slice::from_mut(&mut self.zeta.out_bias));
        out.push(std::slice::from_mut(&mut self.scalar_out_bias));
        out
    }

    pub fn n_params(&mut self) -> usize {
        self.param_slices_mut().iter().map(|s| s.len()).sum()
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("network serializes")
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(Error::from_json)
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    /// Upper bound on the Lipschitz constant of η in the Euclidean norm:
    /// the product of per-layer Frobenius norms.
    pub fn eta_lipschitz_bound(&self) -> f64 {
        let frob = |m: &Matrix| m.data().iter().map(|v| v * v).sum::<f64>().sqrt();
        let hidden: f64 = self.eta.layers.iter().map(|l| frob(&l.weight)).product();
        hidden * crate::linalg::norm2(&self.eta.out_weight)
    }
}

impl Gradients {
    pub fn param_slices(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for layer in &self.eta.layers {
            out.push(layer.weight.data());
            out.push(&layer.bias);
        }
        out.push(&self.eta.out_weight);
        out.push(self.zeta.hidden.weight.data());
        out.push(&self.zeta.hidden.bias);
        out.push(&self.zeta.out_weight);
        out.push(std::slice::from_ref(&self.zeta.out_bias));
        out.push(std::slice::from_ref(&self.scalar_out_bias));
        out
    }

    /// All parameter gradients flattened in [`DeluNetwork::param_slices_mut`] order.
    pub fn flat_params(&self) -> Vec<f64> {
        self.param_slices().concat()
    }
}

#[inline]
fn signum0(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}
