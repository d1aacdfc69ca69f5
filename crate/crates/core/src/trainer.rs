//! Joint training of word vectors from co-occurrence counts and a relation set.
//!
//! The objective is `J = J_C + lambda * J_S` where
//!
//! * `J_C = 1/2 Σ f(X_ij) (w_i·w̃_j + b_i + b̃_j − log X_ij)²` over stored entries,
//! * `J_S = 1/2 Σ R(i,j) ‖w_i − w̃_j‖²` over relation pairs.
//!
//! Each epoch visits every stored entry in shuffled order and, under
//! [`RegSchedule::Union`], every relation pair that has no stored entry.
//! A visit computes the four gradients from the current parameters and
//! then applies AdaGrad to `w_i`, `b_i`, `w̃_j`, `b̃_j` in that order.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::thread;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{CoocMatrix, Vocabulary};
use crate::embedding::EmbeddingTable;
use crate::error::{Error, Result};
use crate::io_util::{self, read_full};
use crate::lexicon::RelationSet;

pub const DEFAULT_DIM: usize = 300;
pub const DEFAULT_LAMBDA: f64 = 10_000.0;
pub const DEFAULT_ALPHA: f64 = 0.75;
pub const DEFAULT_T_MAX: f64 = 100.0;
pub const DEFAULT_LR: f64 = 0.01;
pub const DEFAULT_EPOCHS: usize = 20;
pub const DEFAULT_ADAGRAD_EPS: f64 = 1e-8;

pub const MODEL_MAGIC: [u8; 4] = *b"LXMD";
pub const MODEL_VERSION: u32 = 1;

const INIT_STREAM: u64 = 0;
const COOC_ORDER_STREAM: u64 = 1;
const RELATION_ORDER_STREAM: u64 = 2;

/// Which pairs receive regularizer updates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum RegSchedule {
    /// Only stored co-occurrence entries are visited.
    CoocOnly,
    /// Stored entries plus relation pairs with no co-occurrence.
    #[default]
    Union,
}

impl fmt::Display for RegSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RegSchedule::CoocOnly => "cooc-only",
            RegSchedule::Union => "union",
        })
    }
}

impl FromStr for RegSchedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cooc-only" => Ok(RegSchedule::CoocOnly),
            "union" => Ok(RegSchedule::Union),
            other => Err(Error::InvalidParam(format!("unknown reg schedule {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Hyperparams {
    pub dim: usize,
    pub lambda: f64,
    pub alpha: f64,
    pub t_max: f64,
    pub lr0: f64,
    pub epochs: usize,
    pub seed: u64,
    pub adagrad_eps: f64,
    pub reg_schedule: RegSchedule,
    /// Worker count; 1 is the deterministic mode.
    pub threads: usize,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            dim: DEFAULT_DIM,
            lambda: DEFAULT_LAMBDA,
            alpha: DEFAULT_ALPHA,
            t_max: DEFAULT_T_MAX,
            lr0: DEFAULT_LR,
            epochs: DEFAULT_EPOCHS,
            seed: 0,
            adagrad_eps: DEFAULT_ADAGRAD_EPS,
            reg_schedule: RegSchedule::Union,
            threads: 1,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParam(msg.to_string()));
        if self.dim == 0 {
            return bad("dim must be > 0");
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return bad("lambda must be finite and >= 0");
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad("alpha must be in (0, 1]");
        }
        if !(self.t_max.is_finite() && self.t_max > 0.0) {
            return bad("t_max must be > 0");
        }
        if !(self.lr0.is_finite() && self.lr0 > 0.0) {
            return bad("learning rate must be > 0");
        }
        if self.epochs == 0 {
            return bad("epochs must be >= 1");
        }
        if !(self.adagrad_eps.is_finite() && self.adagrad_eps > 0.0) {
            return bad("adagrad_eps must be > 0");
        }
        if self.threads == 0 {
            return bad("threads must be >= 1");
        }
        Ok(())
    }
}

/// Co-occurrence weighting: `(t / t_max)^alpha` below `t_max`, else 1.
pub fn weight_f(t: f64, alpha: f64, t_max: f64) -> f64 {
    if t < t_max {
        (t / t_max).powf(alpha)
    } else {
        1.0
    }
}

/// Target and context vectors, biases and their AdaGrad accumulators.
/// Matrices are row-major `vocab_size × dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub vocab_size: usize,
    pub dim: usize,
    pub w: Vec<f64>,
    pub wt: Vec<f64>,
    pub b: Vec<f64>,
    pub bt: Vec<f64>,
    pub acc_w: Vec<f64>,
    pub acc_wt: Vec<f64>,
    pub acc_b: Vec<f64>,
    pub acc_bt: Vec<f64>,
}

impl Model {
    pub fn zeros(vocab_size: usize, dim: usize) -> Self {
        let n = vocab_size * dim;
        Model {
            vocab_size,
            dim,
            w: vec![0.0; n],
            wt: vec![0.0; n],
            b: vec![0.0; vocab_size],
            bt: vec![0.0; vocab_size],
            acc_w: vec![0.0; n],
            acc_wt: vec![0.0; n],
            acc_b: vec![0.0; vocab_size],
            acc_bt: vec![0.0; vocab_size],
        }
    }

    /// Vector components uniform in [-1, 1]; biases and accumulators zero.
    pub fn init(vocab_size: usize, dim: usize, seed: u64) -> Self {
        let mut model = Self::zeros(vocab_size, dim);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(INIT_STREAM);
        for v in model.w.iter_mut().chain(model.wt.iter_mut()) {
            *v = rng.random_range(-1.0..=1.0);
        }
        model
    }

    pub fn w_row(&self, i: u32) -> &[f64] {
        let s = i as usize * self.dim;
        &self.w[s..s + self.dim]
    }

    pub fn wt_row(&self, j: u32) -> &[f64] {
        let s = j as usize * self.dim;
        &self.wt[s..s + self.dim]
    }

    pub fn is_finite(&self) -> bool {
        [&self.w, &self.wt, &self.b, &self.bt]
            .iter()
            .all(|v| v.iter().all(|x| x.is_finite()))
    }

    fn check_shape(&self) -> Result<()> {
        let n = self.vocab_size * self.dim;
        let ok = self.dim > 0
            && [&self.w, &self.wt, &self.acc_w, &self.acc_wt]
                .iter()
                .all(|v| v.len() == n)
            && [&self.b, &self.bt, &self.acc_b, &self.acc_bt]
                .iter()
                .all(|v| v.len() == self.vocab_size);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParam("model arrays do not match vocab_size × dim".into()))
        }
    }

    /// Writes the `LXMD` checkpoint; accumulators are appended when requested.
    pub fn write_to<W: Write>(&self, w: &mut W, with_accumulators: bool) -> Result<()> {
        self.check_shape()?;
        w.write_all(&MODEL_MAGIC)?;
        w.write_u32::<LittleEndian>(MODEL_VERSION)?;
        w.write_u64::<LittleEndian>(self.vocab_size as u64)?;
        w.write_u64::<LittleEndian>(self.dim as u64)?;
        let mut arrays = vec![&self.w, &self.wt, &self.b, &self.bt];
        if with_accumulators {
            arrays.extend([&self.acc_w, &self.acc_wt, &self.acc_b, &self.acc_bt]);
        }
        for arr in arrays {
            for &v in arr.iter() {
                w.write_f64::<LittleEndian>(v)?;
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path, with_accumulators: bool) -> Result<()> {
        io_util::write_atomic(path, |w| self.write_to(w, with_accumulators))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        Self::from_bytes(&bytes)
    }

    /// Parses a checkpoint held in memory. Accumulators are read when the
    /// payload carries them and left at zero otherwise.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        const WHAT: &str = "model checkpoint";
        if bytes.len() < 24 {
            return Err(Error::format(WHAT, "truncated header"));
        }
        let mut h = &bytes[..24];
        let mut magic = [0u8; 4];
        h.read_exact(&mut magic)?;
        if magic != MODEL_MAGIC {
            return Err(Error::BadMagic {
                what: WHAT,
                found: magic,
            });
        }
        let version = h.read_u32::<LittleEndian>()?;
        if version != MODEL_VERSION {
            return Err(Error::VersionMismatch {
                what: WHAT,
                expected: MODEL_VERSION,
                found: version,
            });
        }
        let vocab_size = h.read_u64::<LittleEndian>()? as usize;
        let dim = h.read_u64::<LittleEndian>()? as usize;
        if dim == 0 {
            return Err(Error::format(WHAT, "dimension is zero"));
        }
        let params = 2 * vocab_size * dim + 2 * vocab_size;
        let body = &bytes[24..];
        let with_acc = if body.len() == params * 8 {
            false
        } else if body.len() == 2 * params * 8 {
            true
        } else if body.len() < params * 8 {
            return Err(Error::TruncatedRecord {
                what: WHAT,
                index: (body.len() / 8) as u64,
                expected: params as u64,
            });
        } else {
            return Err(Error::format(
                WHAT,
                format!(
                    "{} payload bytes match neither {} nor {} values",
                    body.len(),
                    params,
                    2 * params
                ),
            ));
        };
        let mut model = Model::zeros(vocab_size, dim);
        let mut r = body;
        read_arrays(&mut r, [&mut model.w, &mut model.wt, &mut model.b, &mut model.bt], WHAT)?;
        if with_acc {
            read_arrays(
                &mut r,
                [&mut model.acc_w, &mut model.acc_wt, &mut model.acc_b, &mut model.acc_bt],
                WHAT,
            )?;
        }
        Ok(model)
    }
}

fn read_arrays<R: Read>(reader: &mut R, arrays: [&mut Vec<f64>; 4], what: &'static str) -> Result<()> {
    let expected: usize = arrays.iter().map(|a| a.len()).sum();
    let mut index = 0u64;
    let mut buf = [0u8; 8];
    for arr in arrays {
        for v in arr.iter_mut() {
            if read_full(reader, &mut buf)? < 8 {
                return Err(Error::TruncatedRecord {
                    what,
                    index,
                    expected: expected as u64,
                });
            }
            *v = f64::from_le_bytes(buf);
            index += 1;
        }
    }
    Ok(())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `w_i·w̃_j + b_i + b̃_j − log x`.
pub fn pair_residual(model: &Model, i: u32, j: u32, x: f64) -> f64 {
    dot(model.w_row(i), model.wt_row(j)) + model.b[i as usize] + model.bt[j as usize] - x.ln()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Objective {
    pub total: f64,
    pub corpus: f64,
    pub lexicon: f64,
}

pub fn objective_total(model: &Model, cooc: &CoocMatrix, rel: &RelationSet, hp: &Hyperparams) -> Result<Objective> {
    let corpus = 0.5
        * cooc
            .entries()
            .iter()
            .map(|e| {
                let r = pair_residual(model, e.i, e.j, e.x);
                weight_f(e.x, hp.alpha, hp.t_max) * r * r
            })
            .sum::<f64>();
    let lexicon = 0.5
        * rel
            .pairs()
            .iter()
            .map(|&(i, j)| {
                model
                    .w_row(i)
                    .iter()
                    .zip(model.wt_row(j))
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
            })
            .sum::<f64>();
    let total = corpus + hp.lambda * lexicon;
    if !total.is_finite() {
        return Err(Error::Diverged(format!(
            "objective is not finite (J_C = {corpus}, J_S = {lexicon})"
        )));
    }
    Ok(Objective { total, corpus, lexicon })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub wi: Vec<f64>,
    pub bi: f64,
    pub wj: Vec<f64>,
    pub bj: f64,
}

/// Gradients of one visit, written into `g_wi` / `g_wj`; returns the two
/// bias gradients. `x` is `None` for a relation-only edge.
#[allow(clippy::too_many_arguments)]
fn visit_gradients(
    wi: &[f64],
    wj: &[f64],
    bi: f64,
    bj: f64,
    x: Option<f64>,
    related: bool,
    hp: &Hyperparams,
    g_wi: &mut [f64],
    g_wj: &mut [f64],
) -> f64 {
    let c = match x {
        Some(x) => weight_f(x, hp.alpha, hp.t_max) * (dot(wi, wj) + bi + bj - x.ln()),
        None => 0.0,
    };
    for k in 0..wi.len() {
        g_wi[k] = c * wj[k];
        g_wj[k] = c * wi[k];
    }
    if related && hp.lambda != 0.0 {
        for k in 0..wi.len() {
            let pull = hp.lambda * (wi[k] - wj[k]);
            g_wi[k] += pull;
            g_wj[k] -= pull;
        }
    }
    c
}

/// Per-visit stochastic gradients for `(w_i, b_i, w̃_j, b̃_j)`.
pub fn compute_gradients(
    model: &Model,
    i: u32,
    j: u32,
    x: Option<f64>,
    rel: &RelationSet,
    hp: &Hyperparams,
) -> Gradients {
    let d = model.dim;
    let mut wi = vec![0.0; d];
    let mut wj = vec![0.0; d];
    let c = visit_gradients(
        model.w_row(i),
        model.wt_row(j),
        model.b[i as usize],
        model.bt[j as usize],
        x,
        rel.contains(i, j),
        hp,
        &mut wi,
        &mut wj,
    );
    Gradients { wi, bi: c, wj, bj: c }
}

/// `accum += g²; param -= lr0 · g / (sqrt(accum) + eps)`, element-wise.
pub fn adagrad_step(param: &mut [f64], accum: &mut [f64], grad: &[f64], lr0: f64, eps: f64) {
    for ((p, a), &g) in param.iter_mut().zip(accum.iter_mut()).zip(grad) {
        *a += g * g;
        *p -= lr0 * g / (a.sqrt() + eps);
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Visit {
    Cooc { i: u32, j: u32, x: f64 },
    RelationOnly { i: u32, j: u32 },
}

impl Visit {
    pub fn ids(&self) -> (u32, u32) {
        match *self {
            Visit::Cooc { i, j, .. } | Visit::RelationOnly { i, j } => (i, j),
        }
    }

    pub fn count(&self) -> Option<f64> {
        match *self {
            Visit::Cooc { x, .. } => Some(x),
            Visit::RelationOnly { .. } => None,
        }
    }
}

/// Visits of one epoch before shuffling: stored entries, then relation
/// pairs absent from the matrix (empty under [`RegSchedule::CoocOnly`]).
pub fn visit_schedule(cooc: &CoocMatrix, rel: &RelationSet, schedule: RegSchedule) -> (Vec<Visit>, Vec<Visit>) {
    let stored = cooc
        .entries()
        .iter()
        .map(|e| Visit::Cooc { i: e.i, j: e.j, x: e.x })
        .collect();
    let relation_only = match schedule {
        RegSchedule::CoocOnly => Vec::new(),
        RegSchedule::Union => rel
            .pairs()
            .iter()
            .filter(|&&(i, j)| cooc.get(i, j).is_none())
            .map(|&(i, j)| Visit::RelationOnly { i, j })
            .collect(),
    };
    (stored, relation_only)
}

/// Full-batch gradient: the sum of every per-visit gradient in one epoch.
pub fn full_gradient(model: &Model, cooc: &CoocMatrix, rel: &RelationSet, hp: &Hyperparams) -> Model {
    let mut grad = Model::zeros(model.vocab_size, model.dim);
    let (stored, relation_only) = visit_schedule(cooc, rel, hp.reg_schedule);
    let d = model.dim;
    for v in stored.iter().chain(&relation_only) {
        let (i, j) = v.ids();
        let g = compute_gradients(model, i, j, v.count(), rel, hp);
        let (si, sj) = (i as usize * d, j as usize * d);
        for k in 0..d {
            grad.w[si + k] += g.wi[k];
            grad.wt[sj + k] += g.wj[k];
        }
        grad.b[i as usize] += g.bi;
        grad.bt[j as usize] += g.bj;
    }
    grad
}

struct Scratch {
    g_wi: Vec<f64>,
    g_wj: Vec<f64>,
}

impl Scratch {
    fn new(dim: usize) -> Self {
        Scratch {
            g_wi: vec![0.0; dim],
            g_wj: vec![0.0; dim],
        }
    }
}

/// One visit's rows, borrowed from wherever the parameters live.
struct Rows<'a> {
    wi: &'a mut [f64],
    acc_wi: &'a mut [f64],
    bi: &'a mut f64,
    acc_bi: &'a mut f64,
    wj: &'a mut [f64],
    acc_wj: &'a mut [f64],
    bj: &'a mut f64,
    acc_bj: &'a mut f64,
}

fn update_rows(rows: Rows<'_>, x: Option<f64>, related: bool, hp: &Hyperparams, s: &mut Scratch) {
    let c = visit_gradients(
        rows.wi,
        rows.wj,
        *rows.bi,
        *rows.bj,
        x,
        related,
        hp,
        &mut s.g_wi,
        &mut s.g_wj,
    );
    adagrad_step(rows.wi, rows.acc_wi, &s.g_wi, hp.lr0, hp.adagrad_eps);
    if x.is_some() {
        adagrad_step(
            std::slice::from_mut(rows.bi),
            std::slice::from_mut(rows.acc_bi),
            &[c],
            hp.lr0,
            hp.adagrad_eps,
        );
    }
    adagrad_step(rows.wj, rows.acc_wj, &s.g_wj, hp.lr0, hp.adagrad_eps);
    if x.is_some() {
        adagrad_step(
            std::slice::from_mut(rows.bj),
            std::slice::from_mut(rows.acc_bj),
            &[c],
            hp.lr0,
            hp.adagrad_eps,
        );
    }
}

fn apply_visit(model: &mut Model, visit: &Visit, rel: &RelationSet, hp: &Hyperparams, s: &mut Scratch) {
    let (i, j) = visit.ids();
    let related = hp.lambda != 0.0 && rel.contains(i, j);
    let d = model.dim;
    let (si, sj) = (i as usize * d, j as usize * d);
    let rows = Rows {
        wi: &mut model.w[si..si + d],
        acc_wi: &mut model.acc_w[si..si + d],
        bi: &mut model.b[i as usize],
        acc_bi: &mut model.acc_b[i as usize],
        wj: &mut model.wt[sj..sj + d],
        acc_wj: &mut model.acc_wt[sj..sj + d],
        bj: &mut model.bt[j as usize],
        acc_bj: &mut model.acc_bt[j as usize],
    };
    update_rows(rows, visit.count(), related, hp, s);
}

/// Parameters shared between Hogwild workers. Values are f64 bit patterns
/// accessed with relaxed ordering; concurrent updates may be lost but never
/// tear.
struct SharedModel {
    dim: usize,
    w: Vec<AtomicU64>,
    wt: Vec<AtomicU64>,
    b: Vec<AtomicU64>,
    bt: Vec<AtomicU64>,
    acc_w: Vec<AtomicU64>,
    acc_wt: Vec<AtomicU64>,
    acc_b: Vec<AtomicU64>,
    acc_bt: Vec<AtomicU64>,
}

fn to_atomic(v: &[f64]) -> Vec<AtomicU64> {
    v.iter().map(|x| AtomicU64::new(x.to_bits())).collect()
}

fn load_into(src: &[AtomicU64], dst: &mut [f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d = f64::from_bits(s.load(Ordering::Relaxed));
    }
}

fn store_from(dst: &[AtomicU64], src: &[f64]) {
    for (d, s) in dst.iter().zip(src) {
        d.store(s.to_bits(), Ordering::Relaxed);
    }
}

impl SharedModel {
    fn from_model(m: &Model) -> Self {
        SharedModel {
            dim: m.dim,
            w: to_atomic(&m.w),
            wt: to_atomic(&m.wt),
            b: to_atomic(&m.b),
            bt: to_atomic(&m.bt),
            acc_w: to_atomic(&m.acc_w),
            acc_wt: to_atomic(&m.acc_wt),
            acc_b: to_atomic(&m.acc_b),
            acc_bt: to_atomic(&m.acc_bt),
        }
    }

    fn snapshot_into(&self, m: &mut Model) {
        load_into(&self.w, &mut m.w);
        load_into(&self.wt, &mut m.wt);
        load_into(&self.b, &mut m.b);
        load_into(&self.bt, &mut m.bt);
        load_into(&self.acc_w, &mut m.acc_w);
        load_into(&self.acc_wt, &mut m.acc_wt);
        load_into(&self.acc_b, &mut m.acc_b);
        load_into(&self.acc_bt, &mut m.acc_bt);
    }

    fn run_chunk(&self, visits: &[Visit], rel: &RelationSet, hp: &Hyperparams) {
        let d = self.dim;
        let mut s = Scratch::new(d);
        let mut wi = vec![0.0; d];
        let mut acc_wi = vec![0.0; d];
        let mut wj = vec![0.0; d];
        let mut acc_wj = vec![0.0; d];
        let scalar = |v: &[AtomicU64], k: usize| f64::from_bits(v[k].load(Ordering::Relaxed));
        for visit in visits {
            let (i, j) = visit.ids();
            let (iu, ju) = (i as usize, j as usize);
            let (ri, rj) = (iu * d..iu * d + d, ju * d..ju * d + d);
            load_into(&self.w[ri.clone()], &mut wi);
            load_into(&self.acc_w[ri.clone()], &mut acc_wi);
            load_into(&self.wt[rj.clone()], &mut wj);
            load_into(&self.acc_wt[rj.clone()], &mut acc_wj);
            let mut bi = scalar(&self.b, iu);
            let mut acc_bi = scalar(&self.acc_b, iu);
            let mut bj = scalar(&self.bt, ju);
            let mut acc_bj = scalar(&self.acc_bt, ju);
            let related = hp.lambda != 0.0 && rel.contains(i, j);
            let rows = Rows {
                wi: &mut wi,
                acc_wi: &mut acc_wi,
                bi: &mut bi,
                acc_bi: &mut acc_bi,
                wj: &mut wj,
                acc_wj: &mut acc_wj,
                bj: &mut bj,
                acc_bj: &mut acc_bj,
            };
            update_rows(rows, visit.count(), related, hp, &mut s);
            store_from(&self.w[ri.clone()], &wi);
            store_from(&self.acc_w[ri], &acc_wi);
            store_from(&self.wt[rj.clone()], &wj);
            store_from(&self.acc_wt[rj], &acc_wj);
            if visit.count().is_some() {
                self.b[iu].store(bi.to_bits(), Ordering::Relaxed);
                self.acc_b[iu].store(acc_bi.to_bits(), Ordering::Relaxed);
                self.bt[ju].store(bj.to_bits(), Ordering::Relaxed);
                self.acc_bt[ju].store(acc_bj.to_bits(), Ordering::Relaxed);
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub visits: usize,
    pub objective: Objective,
}

impl EpochStats {
    /// `epoch<TAB>J<TAB>J_C<TAB>J_S`
    pub fn tsv_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}",
            self.epoch, self.objective.total, self.objective.corpus, self.objective.lexicon
        )
    }
}

#[derive(Clone, Debug)]
pub struct Trained {
    pub model: Model,
    pub history: Vec<EpochStats>,
}

pub fn train(cooc: &CoocMatrix, rel: &RelationSet, hp: &Hyperparams) -> Result<Trained> {
    train_with(cooc, rel, hp, |_| {})
}

/// Like [`train`], calling `on_epoch` after every epoch.
pub fn train_with<F>(cooc: &CoocMatrix, rel: &RelationSet, hp: &Hyperparams, on_epoch: F) -> Result<Trained>
where
    F: FnMut(&EpochStats),
{
    hp.validate()?;
    let model = Model::init(cooc.vocab_size(), hp.dim, hp.seed);
    train_from(model, cooc, rel, hp, on_epoch)
}

/// Continues training an existing model (e.g. a checkpoint with accumulators).
pub fn train_from<F>(
    mut model: Model,
    cooc: &CoocMatrix,
    rel: &RelationSet,
    hp: &Hyperparams,
    mut on_epoch: F,
) -> Result<Trained>
where
    F: FnMut(&EpochStats),
{
    hp.validate()?;
    model.check_shape()?;
    if cooc.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    if model.vocab_size != cooc.vocab_size() || model.dim != hp.dim {
        return Err(Error::InvalidParam(format!(
            "model is {}×{}, matrix/hyperparameters need {}×{}",
            model.vocab_size,
            model.dim,
            cooc.vocab_size(),
            hp.dim
        )));
    }
    if rel.vocab_size() != cooc.vocab_size() {
        return Err(Error::DimensionMismatch(rel.vocab_size(), cooc.vocab_size()));
    }

    let (mut stored, mut relation_only) = visit_schedule(cooc, rel, hp.reg_schedule);
    let mut cooc_rng = ChaCha8Rng::seed_from_u64(hp.seed);
    cooc_rng.set_stream(COOC_ORDER_STREAM);
    let mut rel_rng = ChaCha8Rng::seed_from_u64(hp.seed);
    rel_rng.set_stream(RELATION_ORDER_STREAM);

    let shared = (hp.threads > 1).then(|| SharedModel::from_model(&model));
    let mut order: Vec<Visit> = Vec::new();
    let mut history = Vec::with_capacity(hp.epochs);
    let mut scratch = Scratch::new(hp.dim);

    for epoch in 1..=hp.epochs {
        stored.shuffle(&mut cooc_rng);
        relation_only.shuffle(&mut rel_rng);
        match &shared {
            None => {
                for v in stored.iter().chain(&relation_only) {
                    apply_visit(&mut model, v, rel, hp, &mut scratch);
                }
            }
            Some(shared) => {
                order.clear();
                order.extend_from_slice(&stored);
                order.extend_from_slice(&relation_only);
                let chunk = order.len().div_ceil(hp.threads);
                thread::scope(|s| {
                    for part in order.chunks(chunk) {
                        s.spawn(move || shared.run_chunk(part, rel, hp));
                    }
                });
                shared.snapshot_into(&mut model);
            }
        }
        if !model.is_finite() {
            return Err(Error::Diverged(format!("non-finite parameter after epoch {epoch}")));
        }
        let stats = EpochStats {
            epoch,
            visits: stored.len() + relation_only.len(),
            objective: objective_total(&model, cooc, rel, hp)?,
        };
        log::debug!("{}", stats.tsv_line());
        on_epoch(&stats);
        history.push(stats);
    }
    Ok(Trained { model, history })
}

/// Final vectors `w_i + w̃_i`.
pub fn compose_embeddings(model: &Model, vocab: &Vocabulary) -> Result<EmbeddingTable> {
    if model.vocab_size != vocab.len() {
        return Err(Error::DimensionMismatch(model.vocab_size, vocab.len()));
    }
    let data = model.w.iter().zip(&model.wt).map(|(a, b)| a + b).collect();
    EmbeddingTable::new(vocab.words().to_vec(), model.dim, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::CoocEntry;
    use approx::assert_relative_eq;

    fn hp(dim: usize, lambda: f64) -> Hyperparams {
        Hyperparams {
            dim,
            lambda,
            ..Hyperparams::default()
        }
    }

    fn matrix(vocab_size: usize, entries: &[(u32, u32, f64)]) -> CoocMatrix {
        CoocMatrix::from_entries(
            vocab_size,
            entries.iter().map(|&(i, j, x)| CoocEntry { i, j, x }).collect(),
        )
        .unwrap()
    }

    #[test]
    fn weight_examples() {
        assert_eq!(weight_f(100.0, 0.75, 100.0), 1.0);
        assert_eq!(weight_f(250.0, 0.75, 100.0), 1.0);
        assert_eq!(weight_f(0.0, 0.75, 100.0), 0.0);
        assert_relative_eq!(weight_f(50.0, 0.75, 100.0), 0.594_603_557_501_360_5, epsilon = 1e-15);
    }

    #[test]
    fn weight_is_monotone() {
        let mut prev = 0.0;
        for k in 0..=300 {
            let v = weight_f(k as f64 * 0.5, 0.75, 100.0);
            assert!(v >= prev && (0.0..=1.0).contains(&v));
            prev = v;
        }
    }

    #[test]
    fn residual_examples() {
        let mut m = Model::zeros(2, 2);
        assert_eq!(pair_residual(&m, 0, 1, 1.0), 0.0);
        assert_relative_eq!(pair_residual(&m, 0, 1, std::f64::consts::E), -1.0);
        m.w[..2].copy_from_slice(&[1.0, 2.0]);
        m.wt[2..].copy_from_slice(&[0.5, 0.25]);
        m.b[0] = 0.1;
        m.bt[1] = -0.1;
        // w·w̃ + b + b̃ = 1.0 = log(e)
        assert_relative_eq!(pair_residual(&m, 0, 1, std::f64::consts::E), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn objective_examples() {
        let m = Model::init(3, 4, 7);
        let cooc = matrix(3, &[(0, 1, 2.0), (1, 2, 150.0)]);
        let rel = RelationSet::from_pairs("r", 3, vec![(0, 2)]).unwrap();
        let zero = objective_total(&m, &cooc, &rel, &hp(4, 0.0)).unwrap();
        assert_eq!(zero.total, zero.corpus);
        assert!(zero.lexicon > 0.0);
        let empty = objective_total(&m, &cooc, &RelationSet::empty("r", 3), &hp(4, 5.0)).unwrap();
        assert_eq!(empty.lexicon, 0.0);

        let mut tied = m.clone();
        let row = tied.w_row(0).to_vec();
        tied.wt[8..12].copy_from_slice(&row);
        let j = objective_total(&tied, &cooc, &rel, &hp(4, 3.0)).unwrap();
        assert_eq!(j.lexicon, 0.0);
    }

    #[test]
    fn non_finite_objective_is_divergence() {
        let mut m = Model::zeros(2, 1);
        m.w[0] = f64::NAN;
        let cooc = matrix(2, &[(0, 1, 1.0)]);
        assert!(matches!(
            objective_total(&m, &cooc, &RelationSet::empty("r", 2), &hp(1, 0.0)),
            Err(Error::Diverged(_))
        ));
    }

    #[test]
    fn gradients_vanish_at_stationary_points() {
        let mut m = Model::zeros(2, 2);
        m.w[..2].copy_from_slice(&[0.5, 0.5]);
        m.wt[2..].copy_from_slice(&[0.5, 0.5]);
        let x = 0.5f64.exp();
        let empty = RelationSet::empty("r", 2);
        let g = compute_gradients(&m, 0, 1, Some(x), &empty, &hp(2, 10.0));
        assert!(g.wi.iter().chain(&g.wj).all(|v| v.abs() < 1e-15));
        assert!(g.bi.abs() < 1e-15 && g.bj.abs() < 1e-15);

        let rel = RelationSet::from_pairs("r", 2, vec![(0, 1)]).unwrap();
        let g = compute_gradients(&m, 0, 1, Some(x), &rel, &hp(2, 10.0));
        assert!(g.wi.iter().chain(&g.wj).all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn relation_only_visit_has_only_pull() {
        let mut m = Model::zeros(2, 2);
        m.w[..2].copy_from_slice(&[1.0, 0.0]);
        let rel = RelationSet::from_pairs("r", 2, vec![(0, 1)]).unwrap();
        let g = compute_gradients(&m, 0, 1, None, &rel, &hp(2, 2.0));
        assert_eq!(g.wi, vec![2.0, 0.0]);
        assert_eq!(g.wj, vec![-2.0, 0.0]);
        assert_eq!((g.bi, g.bj), (0.0, 0.0));
    }

    #[test]
    fn adagrad_examples() {
        let mut p = [0.3];
        let mut a = [0.0];
        adagrad_step(&mut p, &mut a, &[0.0], 0.01, 1e-8);
        assert_eq!((p, a), ([0.3], [0.0]));

        let mut p = [0.0];
        let mut a = [0.0];
        adagrad_step(&mut p, &mut a, &[-4.0], 0.01, 0.0);
        assert_relative_eq!(p[0], 0.01, epsilon = 1e-15);
        let before = p[0];
        adagrad_step(&mut p, &mut a, &[-4.0], 0.01, 0.0);
        assert_relative_eq!(p[0] - before, 0.01 / 2f64.sqrt(), epsilon = 1e-15);
        assert_eq!(a[0], 32.0);
    }

    #[test]
    fn regularizer_pull_shrinks_gap() {
        let mut m = Model::init(2, 3, 11);
        // Exact fit so the corpus term vanishes.
        let x = (dot(m.w_row(0), m.wt_row(1))).exp();
        let rel = RelationSet::from_pairs("r", 2, vec![(0, 1)]).unwrap();
        let gap = |m: &Model| -> f64 {
            m.w_row(0)
                .iter()
                .zip(m.wt_row(1))
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt()
        };
        let before = gap(&m);
        let visit = Visit::Cooc { i: 0, j: 1, x };
        apply_visit(&mut m, &visit, &rel, &hp(3, 1.0), &mut Scratch::new(3));
        assert!(gap(&m) < before);
    }

    #[test]
    fn union_schedule_adds_relation_only_edges() {
        let cooc = matrix(3, &[(0, 1, 1.0), (1, 0, 1.0)]);
        let rel = RelationSet::from_pairs("r", 3, vec![(0, 1), (0, 2)]).unwrap();
        let (stored, extra) = visit_schedule(&cooc, &rel, RegSchedule::Union);
        assert_eq!(stored.len(), 2);
        assert_eq!(extra, vec![Visit::RelationOnly { i: 0, j: 2 }]);
        let (_, extra) = visit_schedule(&cooc, &rel, RegSchedule::CoocOnly);
        assert!(extra.is_empty());
    }

    #[test]
    fn one_epoch_visit_count() {
        let cooc = matrix(3, &[(0, 1, 1.0), (1, 0, 1.0), (2, 2, 3.0)]);
        let rel = RelationSet::from_pairs("r", 3, vec![(0, 1), (0, 2), (2, 1)]).unwrap();
        let hp = Hyperparams {
            epochs: 1,
            ..hp(2, 1.0)
        };
        let out = train(&cooc, &rel, &hp).unwrap();
        assert_eq!(out.history.len(), 1);
        assert_eq!(out.history[0].visits, 3 + 2);
    }

    #[test]
    fn train_rejects_bad_input() {
        let rel = RelationSet::empty("r", 2);
        let empty = CoocMatrix::from_entries(2, Vec::new()).unwrap();
        assert!(matches!(train(&empty, &rel, &hp(2, 0.0)), Err(Error::EmptyMatrix)));
        let cooc = matrix(2, &[(0, 1, 1.0)]);
        let zero_epochs = Hyperparams {
            epochs: 0,
            ..hp(2, 0.0)
        };
        assert!(matches!(train(&cooc, &rel, &zero_epochs), Err(Error::InvalidParam(_))));
    }

    #[test]
    fn accumulators_never_decrease() {
        let cooc = matrix(3, &[(0, 1, 2.0), (1, 0, 2.0), (1, 2, 0.5), (2, 1, 0.5)]);
        let rel = RelationSet::from_pairs("r", 3, vec![(0, 2)]).unwrap();
        let mut prev = Model::init(3, 4, 3);
        for epochs in 1..=4 {
            let h = Hyperparams {
                epochs,
                seed: 3,
                ..hp(4, 1.0)
            };
            let m = train(&cooc, &rel, &h).unwrap().model;
            for (a, b) in [
                (&m.acc_w, &prev.acc_w),
                (&m.acc_wt, &prev.acc_wt),
                (&m.acc_b, &prev.acc_b),
            ] {
                assert!(a.iter().zip(b.iter()).all(|(x, y)| x >= y));
            }
            prev = m;
        }
    }

    #[test]
    fn compose_adds_rows() {
        let mut m = Model::zeros(1, 2);
        m.w.copy_from_slice(&[1.0, 2.0]);
        m.wt.copy_from_slice(&[3.0, 4.0]);
        let vocab = Vocabulary::from_ordered(vec![("a".into(), 1)], 1).unwrap();
        let t = compose_embeddings(&m, &vocab).unwrap();
        assert_eq!(t.vector("a"), Some(&[4.0, 6.0][..]));
        assert_eq!(t.dim(), 2);

        m.wt.fill(0.0);
        let t = compose_embeddings(&m, &vocab).unwrap();
        assert_eq!(t.vector("a"), Some(m.w_row(0)));
    }

    #[test]
    fn checkpoint_round_trip() {
        let cooc = matrix(3, &[(0, 1, 2.0), (1, 0, 2.0)]);
        let m = train(&cooc, &RelationSet::empty("r", 3), &hp(3, 0.0)).unwrap().model;
        let mut with = Vec::new();
        m.write_to(&mut with, true).unwrap();
        assert_eq!(Model::from_bytes(&with).unwrap(), m);

        let mut without = Vec::new();
        m.write_to(&mut without, false).unwrap();
        let back = Model::from_bytes(&without).unwrap();
        assert_eq!(back.w, m.w);
        assert_eq!(back.bt, m.bt);
        assert!(back.acc_w.iter().all(|&v| v == 0.0));

        assert!(matches!(
            Model::from_bytes(&without[..without.len() - 4]),
            Err(Error::TruncatedRecord { .. })
        ));
        let mut bad = without.clone();
        bad[0] = b'X';
        assert!(matches!(Model::from_bytes(&bad), Err(Error::BadMagic { .. })));
    }

    #[test]
    fn reg_schedule_parses() {
        assert_eq!("union".parse::<RegSchedule>().unwrap(), RegSchedule::Union);
        assert_eq!("cooc-only".parse::<RegSchedule>().unwrap(), RegSchedule::CoocOnly);
        assert!("both".parse::<RegSchedule>().is_err());
        assert_eq!(RegSchedule::CoocOnly.to_string(), "cooc-only");
    }
}
