//! The fixed residual network and its nested derivatives.
//!
//! The architecture is a width-4 residual net,
//!
//! ```text
//! v(x; theta) = T_out . f_2 . f_1 . T_in(x)
//! f_b(s)      = swish(T_b2(swish(T_b1(s)))) + s
//! ```
//!
//! with `T_in: R^d -> R^4`, four 4x4 hidden affines in two residual blocks,
//! and `T_out: R^4 -> R`. All maps carry biases. Besides plain evaluation,
//! this module produces the spatial gradient (forward tangent propagation),
//! the parameter gradient, and the parameter gradient of the spatial
//! gradient (reverse accumulation through the tangent-augmented pass). The
//! last two are what the variational loss gradients are built from.
//!
//! Derivatives are exact up to rounding: no finite differences anywhere in
//! the evaluation path.

use crate::error::{Error, Result};
use crate::util::u64_to_unit_f64;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const HIDDEN_WIDTH: usize = 4;
pub const NUM_BLOCKS: usize = 2;
/// Version tag for the parameter layout used in checkpoints.
pub const LAYOUT_VERSION: u32 = 1;

const W: usize = HIDDEN_WIDTH;

/// Shape of the fixed architecture. Only the input dimension varies;
/// width 4 and two residual blocks are pinned in v1 and other values are
/// rejected at construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetShape {
    d: usize,
}

impl NetShape {
    pub fn new(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::Config("input dimension must be positive".into()));
        }
        Ok(NetShape { d })
    }

    /// Construct with explicit width/depth; anything other than the fixed
    /// (4, 2) architecture is rejected.
    pub fn with_dims(d: usize, hidden_width: usize, num_blocks: usize) -> Result<Self> {
        if hidden_width != HIDDEN_WIDTH || num_blocks != NUM_BLOCKS {
            return Err(Error::Config(format!(
                "v1 supports hidden_width={HIDDEN_WIDTH}, num_blocks={NUM_BLOCKS} only \
                 (got {hidden_width}, {num_blocks})"
            )));
        }
        NetShape::new(d)
    }

    pub fn input_dim(&self) -> usize {
        self.d
    }

    pub fn hidden_width(&self) -> usize {
        HIDDEN_WIDTH
    }

    pub fn num_blocks(&self) -> usize {
        NUM_BLOCKS
    }

    /// Total parameter count D:
    /// `4d + 4` (input map) `+ 2 * 2 * (16 + 4)` (block affines) `+ 4 + 1`
    /// (output map). For d = 20 this is 169.
    pub fn param_count(&self) -> usize {
        W * self.d + W + NUM_BLOCKS * 2 * (W * W + W) + W + 1
    }

    // ---- Parameter layout -------------------------------------------------
    //
    // theta is a flat vector in this fixed order (layout_version 1):
    //   A_in   row-major 4 x d     [0 .. 4d)
    //   B_in   4                   [4d .. 4d+4)
    //   per block b in {0, 1}:     base = 4d + 4 + 40 b
    //     A_{b,1} row-major 4 x 4, B_{b,1} 4, A_{b,2} 4 x 4, B_{b,2} 4
    //   A_out  4                   [4d + 84 .. 4d + 88)
    //   B_out  1                   [4d + 88]

    fn a_in(&self) -> usize {
        0
    }
    fn b_in(&self) -> usize {
        W * self.d
    }
    fn block(&self, b: usize) -> usize {
        W * self.d + W + b * (2 * (W * W + W))
    }
    fn a_out(&self) -> usize {
        self.block(NUM_BLOCKS)
    }
    fn b_out(&self) -> usize {
        self.a_out() + W
    }

    /// Offset of the output bias inside the flat layout (handy in tests:
    /// its value-gradient entry is identically 1).
    pub fn b_out_offset(&self) -> usize {
        self.b_out()
    }
}

/// Flat, immutable parameter vector. All entries are finite by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    shape: NetShape,
    theta: Vec<f64>,
}

impl ParamVector {
    pub fn new(shape: NetShape, theta: Vec<f64>) -> Result<Self> {
        if theta.len() != shape.param_count() {
            return Err(Error::Config(format!(
                "parameter vector length {} does not match D = {}",
                theta.len(),
                shape.param_count()
            )));
        }
        if let Some(p) = theta.iter().position(|t| !t.is_finite()) {
            return Err(Error::NonFinite(format!("theta[{p}] = {}", theta[p])));
        }
        Ok(ParamVector { shape, theta })
    }

    pub fn zeros(shape: NetShape) -> Self {
        ParamVector {
            shape,
            theta: vec![0.0; shape.param_count()],
        }
    }

    pub fn shape(&self) -> NetShape {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.theta
    }

    pub fn linf_norm(&self) -> f64 {
        crate::util::linf_norm(&self.theta)
    }
}

/// Joint value / spatial-gradient record at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct DualEval {
    pub value: f64,
    pub grad_x: Vec<f64>,
}

/// Augmented evaluation record used by the loss gradient:
/// value, spatial gradient, parameter gradient, and the D x d matrix of
/// parameter gradients of each spatial-gradient component.
#[derive(Debug, Clone, PartialEq)]
pub struct FullEval {
    pub value: f64,
    pub grad_x: Vec<f64>,
    pub grad_theta: Vec<f64>,
    /// Row-major D x d: entry `[p * d + j]` is d(dv/dx_j)/d(theta_p).
    pub grad_theta_grad_x: Vec<f64>,
}

impl FullEval {
    pub fn grad_theta_grad_x_at(&self, p: usize, j: usize, d: usize) -> f64 {
        self.grad_theta_grad_x[p * d + j]
    }
}

/// Swish activation `x / (1 + exp(-x))`, evaluated through an
/// overflow-safe logistic.
pub fn swish(x: f64) -> f64 {
    x * logistic(x)
}

#[inline]
fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// swish'(x) from the cached logistic value s = logistic(x).
#[inline]
fn swish_d1(x: f64, s: f64) -> f64 {
    s * (1.0 + x * (1.0 - s))
}

/// swish''(x) from the cached logistic value.
#[inline]
fn swish_d2(x: f64, s: f64) -> f64 {
    s * (1.0 - s) * (2.0 + x * (1.0 - 2.0 * s))
}

/// Glorot-uniform initialization: every weight entry of an affine map is
/// uniform on +/- sqrt(6 / (fan_in + fan_out)); biases are zero. The draw at
/// layout position p is a pure function of (seed, p), so initialization is
/// deterministic and independent of evaluation order.
pub fn init_params(shape: NetShape, seed: u64) -> ParamVector {
    let d = shape.d;
    let dim = shape.param_count();
    let mut theta = vec![0.0; dim];
    let bound_in = (6.0 / (d + W) as f64).sqrt();
    let bound_hidden = (6.0 / (W + W) as f64).sqrt();
    let bound_out = (6.0 / (W + 1) as f64).sqrt();

    let draw = |p: usize, bound: f64, theta: &mut [f64]| {
        let u = u64_to_unit_f64(crate::util::splitmix64_at(seed, p as u64));
        theta[p] = bound * (2.0 * u - 1.0);
    };

    for p in shape.a_in()..shape.b_in() {
        draw(p, bound_in, &mut theta);
    }
    for b in 0..NUM_BLOCKS {
        let base = shape.block(b);
        for l in 0..2 {
            let a0 = base + l * (W * W + W);
            for p in a0..a0 + W * W {
                draw(p, bound_hidden, &mut theta);
            }
        }
    }
    for p in shape.a_out()..shape.a_out() + W {
        draw(p, bound_out, &mut theta);
    }

    ParamVector::new(shape, theta).expect("finite by construction")
}

// ---------------------------------------------------------------------------
// Forward pass machinery
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Default)]
struct BlockValues {
    input: [f64; W],
    z1: [f64; W],
    sig1: [f64; W], // logistic(z1)
    h1: [f64; W],
    z2: [f64; W],
    sig2: [f64; W],
}

/// Recorded forward state. Tangent storage is one flat buffer with
/// `TANGENT_REGIONS` regions of `d` columns each (one column per input
/// coordinate): block-entry tangent, Z1, H1, Z2, H2 for each block, plus
/// the final tangent.
struct Tape {
    blocks: [BlockValues; NUM_BLOCKS],
    s_final: [f64; W],
    tangents: Vec<[f64; W]>,
    d: usize,
}

const REG_BLOCK_IN: usize = 0; // + 5 per block: in, z1, h1, z2, h2
const REGS_PER_BLOCK: usize = 5;
const REG_FINAL: usize = REG_BLOCK_IN + NUM_BLOCKS * REGS_PER_BLOCK;
const TANGENT_REGIONS: usize = REG_FINAL + 1;

impl Tape {
    fn tangent(&self, region: usize, j: usize) -> &[f64; W] {
        &self.tangents[region * self.d + j]
    }
    fn tangent_mut(&mut self, region: usize, j: usize) -> &mut [f64; W] {
        &mut self.tangents[region * self.d + j]
    }
}

#[inline]
fn affine(a: &[f64], b: &[f64], input: &[f64; W]) -> [f64; W] {
    let mut out = [0.0; W];
    for i in 0..W {
        let row = &a[i * W..(i + 1) * W];
        out[i] = b[i] + row[0] * input[0] + row[1] * input[1] + row[2] * input[2] + row[3] * input[3];
    }
    out
}

#[inline]
fn matvec(a: &[f64], input: &[f64; W]) -> [f64; W] {
    let mut out = [0.0; W];
    for i in 0..W {
        let row = &a[i * W..(i + 1) * W];
        out[i] = row[0] * input[0] + row[1] * input[1] + row[2] * input[2] + row[3] * input[3];
    }
    out
}

#[inline]
fn matvec_t(a: &[f64], input: &[f64; W]) -> [f64; W] {
    let mut out = [0.0; W];
    for i in 0..W {
        let v = input[i];
        let row = &a[i * W..(i + 1) * W];
        out[0] += row[0] * v;
        out[1] += row[1] * v;
        out[2] += row[2] * v;
        out[3] += row[3] * v;
    }
    out
}

/// Shared forward pass. The value-path arithmetic is identical whether or
/// not tangents are carried, so `eval`, `eval_with_spatial_grad` and
/// `eval_full` agree bit-exactly on the value and spatial gradient.
fn forward(params: &ParamVector, x: &[f64], with_tangents: bool) -> Tape {
    let shape = params.shape;
    let d = shape.d;
    debug_assert_eq!(x.len(), d);
    let th = &params.theta;

    let mut tape = Tape {
        blocks: [BlockValues::default(); NUM_BLOCKS],
        s_final: [0.0; W],
        tangents: if with_tangents {
            vec![[0.0; W]; TANGENT_REGIONS * d]
        } else {
            Vec::new()
        },
        d,
    };

    // T_in
    let a_in = &th[shape.a_in()..shape.b_in()];
    let b_in = &th[shape.b_in()..shape.b_in() + W];
    let mut s = [0.0; W];
    for i in 0..W {
        let row = &a_in[i * d..(i + 1) * d];
        let mut acc = b_in[i];
        for (k, xv) in x.iter().enumerate() {
            acc += row[k] * xv;
        }
        s[i] = acc;
    }
    if with_tangents {
        // dS0/dx column j is column j of A_in
        for j in 0..d {
            let col = tape.tangent_mut(REG_BLOCK_IN, j);
            for i in 0..W {
                col[i] = a_in[i * d + j];
            }
        }
    }

    for b in 0..NUM_BLOCKS {
        let base = shape.block(b);
        let a1 = &th[base..base + W * W];
        let b1 = &th[base + W * W..base + W * W + W];
        let a2 = &th[base + W * W + W..base + 2 * W * W + W];
        let b2 = &th[base + 2 * W * W + W..base + 2 * W * W + 2 * W];

        let z1 = affine(a1, b1, &s);
        let mut sig1 = [0.0; W];
        let mut h1 = [0.0; W];
        for i in 0..W {
            sig1[i] = logistic(z1[i]);
            h1[i] = z1[i] * sig1[i];
        }
        let z2 = affine(a2, b2, &h1);
        let mut sig2 = [0.0; W];
        let mut h2 = [0.0; W];
        for i in 0..W {
            sig2[i] = logistic(z2[i]);
            h2[i] = z2[i] * sig2[i];
        }
        let out = [h2[0] + s[0], h2[1] + s[1], h2[2] + s[2], h2[3] + s[3]];

        tape.blocks[b] = BlockValues { input: s, z1, sig1, h1, z2, sig2 };

        if with_tangents {
            let reg = REG_BLOCK_IN + b * REGS_PER_BLOCK;
            for j in 0..d {
                let t_in = *tape.tangent(reg, j);
                let tz1 = matvec(a1, &t_in);
                let mut th1 = [0.0; W];
                for i in 0..W {
                    th1[i] = swish_d1(z1[i], sig1[i]) * tz1[i];
                }
                let tz2 = matvec(a2, &th1);
                let mut th2 = [0.0; W];
                for i in 0..W {
                    th2[i] = swish_d1(z2[i], sig2[i]) * tz2[i];
                }
                let t_out = [
                    th2[0] + t_in[0],
                    th2[1] + t_in[1],
                    th2[2] + t_in[2],
                    th2[3] + t_in[3],
                ];
                *tape.tangent_mut(reg + 1, j) = tz1;
                *tape.tangent_mut(reg + 2, j) = th1;
                *tape.tangent_mut(reg + 3, j) = tz2;
                *tape.tangent_mut(reg + 4, j) = th2;
                let next = if b + 1 < NUM_BLOCKS {
                    REG_BLOCK_IN + (b + 1) * REGS_PER_BLOCK
                } else {
                    REG_FINAL
                };
                *tape.tangent_mut(next, j) = t_out;
            }
        }

        s = out;
    }

    tape.s_final = s;
    tape
}

fn output_value(params: &ParamVector, tape: &Tape) -> f64 {
    let shape = params.shape;
    let a_out = &params.theta[shape.a_out()..shape.a_out() + W];
    let s = &tape.s_final;
    params.theta[shape.b_out()]
        + a_out[0] * s[0]
        + a_out[1] * s[1]
        + a_out[2] * s[2]
        + a_out[3] * s[3]
}

fn output_grad_x(params: &ParamVector, tape: &Tape) -> Vec<f64> {
    let shape = params.shape;
    let a_out = &params.theta[shape.a_out()..shape.a_out() + W];
    (0..tape.d)
        .map(|j| {
            let t = tape.tangent(REG_FINAL, j);
            a_out[0] * t[0] + a_out[1] * t[1] + a_out[2] * t[2] + a_out[3] * t[3]
        })
        .collect()
}

/// Forward value of the network; a pure function of `(params, x)`.
pub fn eval(params: &ParamVector, x: &[f64]) -> Result<f64> {
    check_point(params, x)?;
    let tape = forward(params, x, false);
    Ok(output_value(params, &tape))
}

/// Value plus spatial gradient, the latter by forward propagation of the
/// d coordinate tangents (exact, not finite-difference).
pub fn eval_with_spatial_grad(params: &ParamVector, x: &[f64]) -> Result<DualEval> {
    check_point(params, x)?;
    let tape = forward(params, x, true);
    Ok(DualEval {
        value: output_value(params, &tape),
        grad_x: output_grad_x(params, &tape),
    })
}

fn check_point(params: &ParamVector, x: &[f64]) -> Result<()> {
    if x.len() != params.shape.d {
        return Err(Error::Config(format!(
            "point dimension {} does not match network input dimension {}",
            x.len(),
            params.shape.d
        )));
    }
    if let Some(k) = x.iter().position(|c| !c.is_finite()) {
        return Err(Error::NonFinite(format!("x[{k}] = {}", x[k])));
    }
    Ok(())
}

/// One reverse sweep through the tangent-augmented tape.
///
/// `seed_tangent = None` seeds the value output (accumulating
/// `d(value)/d(theta)`); `Some(j)` seeds spatial-gradient component j
/// (accumulating `d(grad_x[j])/d(theta)`). Results are added into `grad`.
fn backward(params: &ParamVector, x: &[f64], tape: &Tape, seed_tangent: Option<usize>, grad: &mut [f64]) {
    let shape = params.shape;
    let d = shape.d;
    let th = &params.theta;
    let a_out = &th[shape.a_out()..shape.a_out() + W];

    // Output layer seeds.
    let mut sb: [f64; W]; // adjoint of the value path state
    let mut tb: [f64; W]; // adjoint of tangent column j (zero for the value pass)
    let a_out4 = [a_out[0], a_out[1], a_out[2], a_out[3]];
    match seed_tangent {
        None => {
            sb = a_out4;
            tb = [0.0; W];
            for i in 0..W {
                grad[shape.a_out() + i] += tape.s_final[i];
            }
            grad[shape.b_out()] += 1.0;
        }
        Some(j) => {
            sb = [0.0; W];
            tb = a_out4;
            let t_final = tape.tangent(REG_FINAL, j);
            for i in 0..W {
                grad[shape.a_out() + i] += t_final[i];
            }
        }
    }

    for b in (0..NUM_BLOCKS).rev() {
        let base = shape.block(b);
        let a1 = &th[base..base + W * W];
        let a2 = &th[base + W * W + W..base + 2 * W * W + W];
        let bv = &tape.blocks[b];
        let reg = REG_BLOCK_IN + b * REGS_PER_BLOCK;

        // out = h2 + input; OUT = H2 + T_in
        let h2b = sb;
        let h2tb = tb;

        // h2 = swish(z2); H2 = swish'(z2) * Z2
        let mut z2b = [0.0; W];
        let mut z2tb = [0.0; W];
        if let Some(j) = seed_tangent {
            let tz2 = tape.tangent(reg + 3, j);
            for i in 0..W {
                let d1 = swish_d1(bv.z2[i], bv.sig2[i]);
                z2b[i] = d1 * h2b[i] + swish_d2(bv.z2[i], bv.sig2[i]) * tz2[i] * h2tb[i];
                z2tb[i] = d1 * h2tb[i];
            }
        } else {
            for i in 0..W {
                z2b[i] = swish_d1(bv.z2[i], bv.sig2[i]) * h2b[i];
            }
        }

        // z2 = A2 h1 + b2; Z2 = A2 H1
        {
            let ga2 = base + W * W + W;
            let gb2 = base + 2 * W * W + W;
            if let Some(j) = seed_tangent {
                let th1 = tape.tangent(reg + 2, j);
                for i in 0..W {
                    for c in 0..W {
                        grad[ga2 + i * W + c] += z2b[i] * bv.h1[c] + z2tb[i] * th1[c];
                    }
                    grad[gb2 + i] += z2b[i];
                }
            } else {
                for i in 0..W {
                    for c in 0..W {
                        grad[ga2 + i * W + c] += z2b[i] * bv.h1[c];
                    }
                    grad[gb2 + i] += z2b[i];
                }
            }
        }
        let h1b = matvec_t(a2, &z2b);
        let h1tb = matvec_t(a2, &z2tb);

        // h1 = swish(z1); H1 = swish'(z1) * Z1
        let mut z1b = [0.0; W];
        let mut z1tb = [0.0; W];
        if let Some(j) = seed_tangent {
            let tz1 = tape.tangent(reg + 1, j);
            for i in 0..W {
                let d1 = swish_d1(bv.z1[i], bv.sig1[i]);
                z1b[i] = d1 * h1b[i] + swish_d2(bv.z1[i], bv.sig1[i]) * tz1[i] * h1tb[i];
                z1tb[i] = d1 * h1tb[i];
            }
        } else {
            for i in 0..W {
                z1b[i] = swish_d1(bv.z1[i], bv.sig1[i]) * h1b[i];
            }
        }

        // z1 = A1 input + b1; Z1 = A1 T_in
        {
            let ga1 = base;
            let gb1 = base + W * W;
            if let Some(j) = seed_tangent {
                let t_in = tape.tangent(reg, j);
                for i in 0..W {
                    for c in 0..W {
                        grad[ga1 + i * W + c] += z1b[i] * bv.input[c] + z1tb[i] * t_in[c];
                    }
                    grad[gb1 + i] += z1b[i];
                }
            } else {
                for i in 0..W {
                    for c in 0..W {
                        grad[ga1 + i * W + c] += z1b[i] * bv.input[c];
                    }
                    grad[gb1 + i] += z1b[i];
                }
            }
        }

        // residual skip: input feeds both z1 and out directly
        let from_a1 = matvec_t(a1, &z1b);
        for i in 0..W {
            sb[i] = from_a1[i] + h2b[i];
        }
        let from_a1_t = matvec_t(a1, &z1tb);
        for i in 0..W {
            tb[i] = from_a1_t[i] + h2tb[i];
        }
    }

    // T_in: s0 = A_in x + b_in; tangent column j of S0 is A_in column j.
    let ga_in = shape.a_in();
    let gb_in = shape.b_in();
    for i in 0..W {
        let row = ga_in + i * d;
        for (k, xv) in x.iter().enumerate() {
            grad[row + k] += sb[i] * xv;
        }
        grad[gb_in + i] += sb[i];
    }
    if let Some(j) = seed_tangent {
        for i in 0..W {
            grad[ga_in + i * d + j] += tb[i];
        }
    }
}

/// Value, spatial gradient, parameter gradient, and parameter gradient of
/// the spatial gradient in one record. The parameter derivatives come from
/// reverse sweeps over the recorded tangent-augmented forward pass: one
/// sweep for the value, one per spatial-gradient component.
pub fn eval_full(params: &ParamVector, x: &[f64]) -> Result<FullEval> {
    check_point(params, x)?;
    let shape = params.shape;
    let d = shape.d;
    let dim = shape.param_count();
    let tape = forward(params, x, true);

    let value = output_value(params, &tape);
    let grad_x = output_grad_x(params, &tape);

    let mut grad_theta = vec![0.0; dim];
    backward(params, x, &tape, None, &mut grad_theta);

    let mut grad_theta_grad_x = vec![0.0; dim * d];
    let mut col = vec![0.0; dim];
    for j in 0..d {
        col.iter_mut().for_each(|c| *c = 0.0);
        backward(params, x, &tape, Some(j), &mut col);
        for p in 0..dim {
            grad_theta_grad_x[p * d + j] = col[p];
        }
    }

    Ok(FullEval { value, grad_x, grad_theta, grad_theta_grad_x })
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    d: usize,
    hidden_width: usize,
    num_blocks: usize,
    layout_version: u32,
    theta: Vec<f64>,
}

/// Write a parameter checkpoint as JSON (header plus flat theta array).
pub fn save_checkpoint(params: &ParamVector, path: &Path) -> Result<()> {
    let ck = Checkpoint {
        d: params.shape.d,
        hidden_width: HIDDEN_WIDTH,
        num_blocks: NUM_BLOCKS,
        layout_version: LAYOUT_VERSION,
        theta: params.theta.clone(),
    };
    let file = std::fs::File::create(path)?;
    serde_json::to_writer(std::io::BufWriter::new(file), &ck)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<ParamVector> {
    let file = std::fs::File::open(path)?;
    let ck: Checkpoint = serde_json::from_reader(std::io::BufReader::new(file))?;
    if ck.layout_version != LAYOUT_VERSION {
        return Err(Error::Config(format!(
            "unsupported layout_version {}",
            ck.layout_version
        )));
    }
    let shape = NetShape::with_dims(ck.d, ck.hidden_width, ck.num_blocks)?;
    ParamVector::new(shape, ck.theta)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_point(d: usize, seed: u64) -> Vec<f64> {
        (0..d)
            .map(|k| u64_to_unit_f64(crate::util::splitmix64_at(seed, k as u64)))
            .collect()
    }

    #[test]
    fn swish_reference_values() {
        assert_eq!(swish(0.0), 0.0);
        // sigmoid saturates: swish(50) within 1e-12 of 50
        assert!((swish(50.0) - 50.0).abs() < 1e-12);
        // high-precision oracle value of 1 / (1 + e^-1)
        assert!((swish(1.0) - 0.7310585786300049).abs() < 1e-16);
        // overflow-safe on the negative side
        assert_eq!(swish(-1000.0), 0.0);
        assert!(swish(-30.0).is_finite());
    }

    #[test]
    fn param_counts_match_layer_shapes() {
        assert_eq!(NetShape::new(20).unwrap().param_count(), 169);
        assert_eq!(NetShape::new(2).unwrap().param_count(), 97);
        assert_eq!(NetShape::new(1).unwrap().param_count(), 93);
        assert!(NetShape::with_dims(5, 8, 2).is_err());
        assert!(NetShape::with_dims(5, 4, 3).is_err());
        assert!(NetShape::new(0).is_err());
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let shape = NetShape::new(20).unwrap();
        let a = init_params(shape, 7);
        let b = init_params(shape, 7);
        assert_eq!(a.as_slice(), b.as_slice());
        assert_eq!(a.len(), 169);
        assert_ne!(a.as_slice(), init_params(shape, 8).as_slice());
        // biases zero
        assert_eq!(a.as_slice()[shape.b_in()], 0.0);
        assert_eq!(a.as_slice()[shape.b_out()], 0.0);
        // weights within the Glorot bound for the input map
        let bound = (6.0 / 24.0_f64).sqrt();
        for p in 0..80 {
            assert!(a.as_slice()[p].abs() <= bound);
        }
        assert_eq!(init_params(NetShape::new(2).unwrap(), 3).len(), 97);
    }

    #[test]
    fn zero_params_evaluate_to_zero() {
        let shape = NetShape::new(6).unwrap();
        let params = ParamVector::zeros(shape);
        let x = random_point(6, 1);
        assert_eq!(eval(&params, &x).unwrap(), 0.0);
        let dual = eval_with_spatial_grad(&params, &x).unwrap();
        assert_eq!(dual.value, 0.0);
        assert!(dual.grad_x.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn constant_network_has_zero_spatial_grad() {
        let shape = NetShape::new(3).unwrap();
        let mut theta = vec![0.0; shape.param_count()];
        theta[shape.b_out_offset()] = 4.25;
        let params = ParamVector::new(shape, theta).unwrap();
        let dual = eval_with_spatial_grad(&params, &[0.1, 0.9, 0.4]).unwrap();
        assert_eq!(dual.value, 4.25);
        assert!(dual.grad_x.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn hand_built_pass_through_recovers_first_coordinate() {
        // A_in row 0 = e_1, blocks zeroed (identity via the residual skip),
        // A_out = e_1: the network realizes v(x) = x_1 in d = 1.
        let shape = NetShape::new(1).unwrap();
        let mut theta = vec![0.0; shape.param_count()];
        theta[0] = 1.0; // A_in[0, 0]
        theta[shape.a_out()] = 1.0;
        let params = ParamVector::new(shape, theta).unwrap();
        assert_eq!(eval(&params, &[0.3]).unwrap(), 0.3);
        let dual = eval_with_spatial_grad(&params, &[0.3]).unwrap();
        assert_eq!(dual.grad_x[0], 1.0);
    }

    #[test]
    fn purity_repeated_evaluation_is_bit_identical() {
        let shape = NetShape::new(5).unwrap();
        let params = init_params(shape, 11);
        let x = random_point(5, 2);
        assert_eq!(eval(&params, &x).unwrap(), eval(&params, &x).unwrap());
        assert_eq!(
            eval_with_spatial_grad(&params, &x).unwrap(),
            eval_with_spatial_grad(&params, &x).unwrap()
        );
        assert_eq!(eval_full(&params, &x).unwrap(), eval_full(&params, &x).unwrap());
    }

    #[test]
    fn internal_consistency_across_evaluation_modes() {
        for d in [1usize, 2, 5, 20] {
            let shape = NetShape::new(d).unwrap();
            let params = init_params(shape, 3 + d as u64);
            let x = random_point(d, 40 + d as u64);
            let v = eval(&params, &x).unwrap();
            let dual = eval_with_spatial_grad(&params, &x).unwrap();
            let full = eval_full(&params, &x).unwrap();
            assert_eq!(v, dual.value);
            assert_eq!(v, full.value);
            assert_eq!(dual.grad_x, full.grad_x);
        }
    }

    #[test]
    fn zero_params_value_gradient_hits_output_bias() {
        let shape = NetShape::new(4).unwrap();
        let params = ParamVector::zeros(shape);
        let full = eval_full(&params, &random_point(4, 5)).unwrap();
        assert_eq!(full.grad_theta[shape.b_out_offset()], 1.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let shape = NetShape::new(3).unwrap();
        assert!(ParamVector::new(shape, vec![0.0; 5]).is_err());
        let mut theta = vec![0.0; shape.param_count()];
        theta[0] = f64::NAN;
        assert!(ParamVector::new(shape, theta).is_err());
        let params = ParamVector::zeros(shape);
        assert!(eval(&params, &[0.0, 0.0]).is_err());
        assert!(eval(&params, &[0.0, 0.0, f64::INFINITY]).is_err());
    }

    // ---- finite-difference oracles ----------------------------------------

    fn fd_grad_theta(params: &ParamVector, x: &[f64]) -> Vec<f64> {
        let shape = params.shape();
        let mut g = vec![0.0; params.len()];
        for p in 0..params.len() {
            let h = 1e-5 * params.as_slice()[p].abs().max(1.0);
            let mut up = params.as_slice().to_vec();
            up[p] += h;
            let mut dn = params.as_slice().to_vec();
            dn[p] -= h;
            let vp = eval(&ParamVector::new(shape, up).unwrap(), x).unwrap();
            let vm = eval(&ParamVector::new(shape, dn).unwrap(), x).unwrap();
            g[p] = (vp - vm) / (2.0 * h);
        }
        g
    }

    fn fd_grad_x(params: &ParamVector, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        for k in 0..x.len() {
            let h = 1e-5;
            let mut up = x.to_vec();
            up[k] += h;
            let mut dn = x.to_vec();
            dn[k] -= h;
            g[k] = (eval(params, &up).unwrap() - eval(params, &dn).unwrap()) / (2.0 * h);
        }
        g
    }

    fn fd_grad_theta_grad_x(params: &ParamVector, x: &[f64]) -> Vec<f64> {
        let shape = params.shape();
        let d = x.len();
        let mut m = vec![0.0; params.len() * d];
        for p in 0..params.len() {
            let h = 1e-5 * params.as_slice()[p].abs().max(1.0);
            let mut up = params.as_slice().to_vec();
            up[p] += h;
            let mut dn = params.as_slice().to_vec();
            dn[p] -= h;
            let gp = eval_with_spatial_grad(&ParamVector::new(shape, up).unwrap(), x).unwrap();
            let gm = eval_with_spatial_grad(&ParamVector::new(shape, dn).unwrap(), x).unwrap();
            for j in 0..d {
                m[p * d + j] = (gp.grad_x[j] - gm.grad_x[j]) / (2.0 * h);
            }
        }
        m
    }

    fn max_rel_err(a: &[f64], b: &[f64]) -> f64 {
        let scale = crate::util::linf_norm(a).max(crate::util::linf_norm(b)).max(1e-12);
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs() / (x.abs().max(y.abs()) + 1e-8 * scale))
            .fold(0.0, f64::max)
    }

    #[test]
    fn spatial_grad_matches_central_differences_d5() {
        let shape = NetShape::new(5).unwrap();
        let params = init_params(shape, 21);
        let x = random_point(5, 22);
        let dual = eval_with_spatial_grad(&params, &x).unwrap();
        let fd = fd_grad_x(&params, &x);
        assert!(max_rel_err(&dual.grad_x, &fd) < 1e-6);
    }

    #[test]
    fn grad_theta_matches_central_differences_d3() {
        let shape = NetShape::new(3).unwrap();
        let params = init_params(shape, 31);
        let x = random_point(3, 32);
        let full = eval_full(&params, &x).unwrap();
        let fd = fd_grad_theta(&params, &x);
        assert!(max_rel_err(&full.grad_theta, &fd) < 1e-6);
    }

    #[test]
    fn grad_theta_grad_x_matches_central_differences_d3() {
        let shape = NetShape::new(3).unwrap();
        let params = init_params(shape, 41);
        let x = random_point(3, 42);
        let full = eval_full(&params, &x).unwrap();
        let fd = fd_grad_theta_grad_x(&params, &x);
        assert!(max_rel_err(&full.grad_theta_grad_x, &fd) < 1e-5);
    }

    #[test]
    fn exact_gradients_across_dimensions() {
        for (i, d) in [1usize, 2, 5, 20].into_iter().enumerate() {
            let shape = NetShape::new(d).unwrap();
            let params = init_params(shape, 100 + i as u64);
            let x = random_point(d, 200 + i as u64);
            let full = eval_full(&params, &x).unwrap();
            assert!(
                max_rel_err(&full.grad_theta, &fd_grad_theta(&params, &x)) < 1e-5,
                "grad_theta d={d}"
            );
            assert!(
                max_rel_err(&full.grad_theta_grad_x, &fd_grad_theta_grad_x(&params, &x)) < 1e-5,
                "grad_theta_grad_x d={d}"
            );
        }
    }

    #[test]
    fn value_is_lipschitz_in_theta_on_sampled_instances() {
        let shape = NetShape::new(5).unwrap();
        let params = init_params(shape, 55);
        let x = random_point(5, 56);
        let full = eval_full(&params, &x).unwrap();
        let grad_norm = crate::util::l2_norm(&full.grad_theta);
        for s in 0..10u64 {
            let delta: Vec<f64> = (0..params.len())
                .map(|p| 2e-4 * (u64_to_unit_f64(crate::util::splitmix64_at(s, p as u64)) - 0.5))
                .collect();
            let mut perturbed = params.as_slice().to_vec();
            for (t, d) in perturbed.iter_mut().zip(&delta) {
                *t += d;
            }
            let v2 = eval(&ParamVector::new(shape, perturbed).unwrap(), &x).unwrap();
            let dv = (v2 - full.value).abs();
            let bound = (grad_norm + 1.0) * crate::util::l2_norm(&delta) * 2.0;
            assert!(dv <= bound, "|dv| = {dv}, bound = {bound}");
        }
    }

    #[test]
    fn checkpoint_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("params.json");
        let params = init_params(NetShape::new(7).unwrap(), 9);
        save_checkpoint(&params, &path).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        assert_eq!(params, loaded);
    }
}
