//! Matrix elements of the cascaded-source effective Hamiltonian and the jump
//! operators, plus their restriction to fixed excitation-number sectors.
//!
//! All elements are in angular units (ns⁻¹). The source-mode terms scale with
//! the instantaneous source rate κ_s(t): the decay term linearly and the
//! feed term with √κ_s(t), so they are stored per unit rate.

use std::collections::HashMap;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::space::{BasisState, HilbertSpace};
use crate::error::{Error, Result};
use crate::model::{angular, AtomLevel, Direction, SystemParams};

/// Largest dimension for which a dense operator is built.
pub const MAX_DENSE_DIMENSION: usize = 4096;

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum JumpChannel {
    /// Photon leaves in the drive direction (source and forward-mode
    /// emission interfere).
    Transmit,
    /// Photon leaves against the drive direction via the backward mode.
    Reflect,
    CavLossA,
    CavLossB,
    AtomEmitMinus,
    AtomEmitZero,
    AtomEmitPlus,
}

impl JumpChannel {
    pub const ALL: [JumpChannel; 7] = [
        JumpChannel::Transmit,
        JumpChannel::Reflect,
        JumpChannel::CavLossA,
        JumpChannel::CavLossB,
        JumpChannel::AtomEmitMinus,
        JumpChannel::AtomEmitZero,
        JumpChannel::AtomEmitPlus,
    ];

    pub fn label(self) -> &'static str {
        match self {
            JumpChannel::Transmit => "TRANSMIT",
            JumpChannel::Reflect => "REFLECT",
            JumpChannel::CavLossA => "CAV_LOSS_A",
            JumpChannel::CavLossB => "CAV_LOSS_B",
            JumpChannel::AtomEmitMinus => "ATOM_EMIT_MINUS",
            JumpChannel::AtomEmitZero => "ATOM_EMIT_ZERO",
            JumpChannel::AtomEmitPlus => "ATOM_EMIT_PLUS",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.label() == s)
    }

    pub fn is_output(self) -> bool {
        matches!(self, JumpChannel::Transmit | JumpChannel::Reflect)
    }

    fn emitted_to(level: AtomLevel) -> Self {
        match level {
            AtomLevel::GMinus => JumpChannel::AtomEmitMinus,
            AtomLevel::GZero => JumpChannel::AtomEmitZero,
            _ => JumpChannel::AtomEmitPlus,
        }
    }
}

impl fmt::Display for JumpChannel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// How an element depends on the source rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TermKind {
    Static,
    /// Multiplied by κ_s(t).
    SourceDecay,
    /// Multiplied by √κ_s(t).
    SourceFeed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    A,
    B,
}

/// Angular-unit rates of one configuration.
#[derive(Debug, Clone, Copy)]
struct Rates {
    g: f64,
    g_minus: f64,
    g_pi: f64,
    kappa: f64,
    kappa_i: f64,
    kappa_ex: f64,
    h: f64,
    gamma: f64,
}

impl Rates {
    fn new(p: &SystemParams) -> Self {
        Rates {
            g: angular(p.g),
            g_minus: angular(p.g_minus),
            g_pi: angular(p.g_pi),
            kappa: angular(p.kappa()),
            kappa_i: angular(p.kappa_i),
            kappa_ex: angular(p.kappa_ex),
            h: angular(p.h),
            gamma: angular(p.gamma),
        }
    }

    /// Mode `a` is σ⁺ and drives G_MINUS ↔ e; mode `b` is σ⁻ and drives
    /// G_PLUS ↔ e. Each also reaches the other two ground levels through the
    /// parasitic couplings.
    fn coupling(&self, mode: Mode, level: AtomLevel) -> f64 {
        match (mode, level) {
            (Mode::A, AtomLevel::GMinus) | (Mode::B, AtomLevel::GPlus) => self.g,
            (Mode::A, AtomLevel::GPlus) | (Mode::B, AtomLevel::GMinus) => self.g_minus,
            (_, AtomLevel::GZero) => self.g_pi,
            (_, AtomLevel::Excited) => 0.0,
        }
    }
}

fn forward_mode(drive: Direction) -> Mode {
    match drive {
        Direction::Rightward => Mode::A,
        Direction::Leftward => Mode::B,
    }
}

fn photons(s: &BasisState, m: Mode) -> usize {
    match m {
        Mode::A => s.na,
        Mode::B => s.nb,
    }
}

fn with_photons(s: &BasisState, m: Mode, n: usize) -> BasisState {
    match m {
        Mode::A => BasisState { na: n, ..*s },
        Mode::B => BasisState { nb: n, ..*s },
    }
}

fn cutoff(space: &HilbertSpace, m: Mode) -> usize {
    match m {
        Mode::A => space.fock_cut_a,
        Mode::B => space.fock_cut_b,
    }
}

fn sq(n: usize) -> f64 {
    (n as f64).sqrt()
}

/// Calls `emit(row, kind, value)` for every nonzero ⟨row|H|col⟩.
fn hamiltonian_column(
    r: &Rates,
    space: &HilbertSpace,
    drive: Direction,
    col: &BasisState,
    mut emit: impl FnMut(BasisState, TermKind, Complex64),
) {
    let excited = col.atom == AtomLevel::Excited;

    let mut damping = r.kappa * (col.na + col.nb) as f64;
    if excited {
        damping += r.gamma;
    }
    if damping != 0.0 {
        emit(*col, TermKind::Static, -I * damping);
    }

    // h (a†b + b†a)
    if r.h != 0.0 {
        if col.nb > 0 && col.na < space.fock_cut_a {
            let row = BasisState {
                na: col.na + 1,
                nb: col.nb - 1,
                ..*col
            };
            emit(row, TermKind::Static, (r.h * sq(col.na + 1) * sq(col.nb)).into());
        }
        if col.na > 0 && col.nb < space.fock_cut_b {
            let row = BasisState {
                na: col.na - 1,
                nb: col.nb + 1,
                ..*col
            };
            emit(row, TermKind::Static, (r.h * sq(col.na) * sq(col.nb + 1)).into());
        }
    }

    for mode in [Mode::A, Mode::B] {
        let n = photons(col, mode);
        if excited {
            // c a† σ_ge
            if n < cutoff(space, mode) {
                for level in AtomLevel::GROUND {
                    let c = r.coupling(mode, level);
                    if c != 0.0 {
                        let row = BasisState {
                            atom: level,
                            ..with_photons(col, mode, n + 1)
                        };
                        emit(row, TermKind::Static, (c * sq(n + 1)).into());
                    }
                }
            }
        } else if n > 0 {
            // c σ_eg a
            let c = r.coupling(mode, col.atom);
            if c != 0.0 {
                let row = BasisState {
                    atom: AtomLevel::Excited,
                    ..with_photons(col, mode, n - 1)
                };
                emit(row, TermKind::Static, (c * sq(n)).into());
            }
        }
    }

    if col.ns > 0 {
        emit(*col, TermKind::SourceDecay, -I * col.ns as f64);
        let fwd = forward_mode(drive);
        let nf = photons(col, fwd);
        if nf < cutoff(space, fwd) {
            let row = BasisState {
                ns: col.ns - 1,
                ..with_photons(col, fwd, nf + 1)
            };
            let v = -2.0 * I * r.kappa_ex.sqrt() * sq(nf + 1) * sq(col.ns);
            emit(row, TermKind::SourceFeed, v);
        }
    }
}

/// Calls `emit(channel, row, kind, value)` for every nonzero ⟨row|C|col⟩.
/// `SourceFeed` elements are per unit √κ_s(t).
fn jump_column(
    r: &Rates,
    drive: Direction,
    col: &BasisState,
    mut emit: impl FnMut(JumpChannel, BasisState, TermKind, Complex64),
) {
    let fwd = forward_mode(drive);
    let bwd = match fwd {
        Mode::A => Mode::B,
        Mode::B => Mode::A,
    };
    let nf = photons(col, fwd);
    if nf > 0 {
        let row = with_photons(col, fwd, nf - 1);
        emit(
            JumpChannel::Transmit,
            row,
            TermKind::Static,
            ((2.0 * r.kappa_ex).sqrt() * sq(nf)).into(),
        );
    }
    if col.ns > 0 {
        let row = BasisState { ns: col.ns - 1, ..*col };
        emit(
            JumpChannel::Transmit,
            row,
            TermKind::SourceFeed,
            (2.0f64.sqrt() * sq(col.ns)).into(),
        );
    }
    let nbk = photons(col, bwd);
    if nbk > 0 {
        let row = with_photons(col, bwd, nbk - 1);
        emit(
            JumpChannel::Reflect,
            row,
            TermKind::Static,
            ((2.0 * r.kappa_ex).sqrt() * sq(nbk)).into(),
        );
    }
    if r.kappa_i > 0.0 {
        if col.na > 0 {
            let row = with_photons(col, Mode::A, col.na - 1);
            let v = (2.0 * r.kappa_i).sqrt() * sq(col.na);
            emit(JumpChannel::CavLossA, row, TermKind::Static, v.into());
        }
        if col.nb > 0 {
            let row = with_photons(col, Mode::B, col.nb - 1);
            let v = (2.0 * r.kappa_i).sqrt() * sq(col.nb);
            emit(JumpChannel::CavLossB, row, TermKind::Static, v.into());
        }
    }
    if col.atom == AtomLevel::Excited && r.gamma > 0.0 {
        let v = (2.0 * r.gamma / 3.0).sqrt();
        for level in AtomLevel::GROUND {
            let row = BasisState { atom: level, ..*col };
            emit(JumpChannel::emitted_to(level), row, TermKind::Static, v.into());
        }
    }
}

fn dense_guard(space: &HilbertSpace) -> Result<usize> {
    let dim = space.checked_dimension()?;
    if dim > MAX_DENSE_DIMENSION {
        return Err(Error::DimensionOverflow {
            dim,
            limit: MAX_DENSE_DIMENSION,
        });
    }
    Ok(dim)
}

/// Dense effective Hamiltonian for a σ⁺ probe with a constant source rate
/// taken from `params.kappa_s`.
pub fn build_effective_hamiltonian(params: &SystemParams, space: &HilbertSpace) -> Result<DMatrix<Complex64>> {
    build_effective_hamiltonian_with(params, space, Direction::Rightward, angular(params.kappa_s))
}

/// Dense effective Hamiltonian with an explicit drive direction and
/// angular source rate `kappa_s` (ns⁻¹).
pub fn build_effective_hamiltonian_with(
    params: &SystemParams,
    space: &HilbertSpace,
    drive: Direction,
    kappa_s: f64,
) -> Result<DMatrix<Complex64>> {
    let dim = dense_guard(space)?;
    let r = Rates::new(params);
    let mut h = DMatrix::<Complex64>::zeros(dim, dim);
    for (j, col) in space.states().enumerate() {
        hamiltonian_column(&r, space, drive, &col, |row, kind, v| {
            let i = space.index(&row).expect("element stays inside the space");
            let scale = match kind {
                TermKind::Static => 1.0,
                TermKind::SourceDecay => kappa_s,
                TermKind::SourceFeed => kappa_s.sqrt(),
            };
            h[(i, j)] += v * scale;
        });
    }
    Ok(h)
}

/// Dense jump operators for the given drive direction and source rate.
pub fn build_jump_operators(
    params: &SystemParams,
    space: &HilbertSpace,
    drive: Direction,
    kappa_s: f64,
) -> Result<Vec<(JumpChannel, DMatrix<Complex64>)>> {
    let dim = dense_guard(space)?;
    let r = Rates::new(params);
    let mut ops: Vec<(JumpChannel, DMatrix<Complex64>)> = JumpChannel::ALL
        .iter()
        .map(|&c| (c, DMatrix::zeros(dim, dim)))
        .collect();
    for (j, col) in space.states().enumerate() {
        jump_column(&r, drive, &col, |ch, row, kind, v| {
            let i = space.index(&row).expect("jump stays inside the space");
            let scale = if kind == TermKind::SourceFeed {
                kappa_s.sqrt()
            } else {
                1.0
            };
            let k = JumpChannel::ALL.iter().position(|&c| c == ch).unwrap();
            ops[k].1[(i, j)] += v * scale;
        });
    }
    Ok(ops)
}

/// Compressed sparse rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    pub rows: usize,
    pub cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<Complex64>,
}

impl Csr {
    pub fn from_triplets(rows: usize, cols: usize, mut trip: Vec<(usize, usize, Complex64)>) -> Self {
        trip.sort_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0usize; rows + 1];
        let mut indices = Vec::with_capacity(trip.len());
        let mut values: Vec<Complex64> = Vec::with_capacity(trip.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in trip {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            last = Some((r, c));
            indices.push(c);
            values.push(v);
            indptr[r + 1] += 1;
        }
        for r in 0..rows {
            indptr[r + 1] += indptr[r];
        }
        Csr {
            rows,
            cols,
            indptr,
            indices,
            values,
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    #[inline]
    fn row_dot(&self, lo: usize, hi: usize, x: &[Complex64]) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (v, &c) in self.values[lo..hi].iter().zip(&self.indices[lo..hi]) {
            acc += v * x[c];
        }
        acc
    }

    /// y = A x
    pub fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        for (yr, w) in y.iter_mut().zip(self.indptr.windows(2)) {
            *yr = self.row_dot(w[0], w[1], x);
        }
    }

    /// y += s A x
    pub fn apply_add(&self, s: f64, x: &[Complex64], y: &mut [Complex64]) {
        for (yr, w) in y.iter_mut().zip(self.indptr.windows(2)) {
            *yr += self.row_dot(w[0], w[1], x) * s;
        }
    }
}

/// Jump operator restricted to sector N → N−1.
#[derive(Debug, Clone)]
pub struct SectorJump {
    pub channel: JumpChannel,
    pub fixed: Csr,
    /// Part scaled by √κ_s(t).
    pub source: Option<Csr>,
}

/// Generator d|ψ⟩/dt = −iH|ψ⟩ restricted to one excitation-number sector.
#[derive(Debug, Clone)]
pub struct Sector {
    pub n: usize,
    pub states: Vec<BasisState>,
    /// −iH for the source-independent part.
    pub generator: Csr,
    /// Diagonal multiplied by κ_s(t).
    pub source_decay: Vec<f64>,
    /// Multiplied by √κ_s(t).
    pub source_feed: Csr,
    pub jumps: Vec<SectorJump>,
}

impl Sector {
    pub fn dim(&self) -> usize {
        self.states.len()
    }

    /// dy = −iH(t) y at source rate `kappa_s`.
    pub fn derivative(&self, kappa_s: f64, y: &[Complex64], dy: &mut [Complex64]) {
        self.generator.apply(y, dy);
        if kappa_s > 0.0 {
            for ((d, &c), &v) in dy.iter_mut().zip(&self.source_decay).zip(y) {
                if c != 0.0 {
                    *d += v * (c * kappa_s);
                }
            }
            self.source_feed.apply_add(kappa_s.sqrt(), y, dy);
        }
    }

    /// C_k y for jump `k` at source rate `kappa_s`, written into `out`.
    pub fn apply_jump(&self, k: usize, kappa_s: f64, y: &[Complex64], out: &mut [Complex64]) {
        let j = &self.jumps[k];
        j.fixed.apply(y, out);
        if let Some(src) = &j.source {
            if kappa_s > 0.0 {
                src.apply_add(kappa_s.sqrt(), y, out);
            }
        }
    }
}

/// Sector operators for excitation numbers 0..=max_n.
pub fn build_sectors(
    params: &SystemParams,
    space: &HilbertSpace,
    drive: Direction,
    max_n: usize,
) -> Result<Vec<Sector>> {
    params.validate()?;
    space.checked_dimension()?;
    let r = Rates::new(params);
    let mut local: Vec<HashMap<BasisState, usize>> = Vec::with_capacity(max_n + 1);
    let mut all_states = Vec::with_capacity(max_n + 1);
    for n in 0..=max_n {
        let states = space.sector_states(n);
        local.push(states.iter().enumerate().map(|(i, s)| (*s, i)).collect());
        all_states.push(states);
    }

    let mut sectors = Vec::with_capacity(max_n + 1);
    for (n, states) in all_states.iter().enumerate() {
        let dim = states.len();
        let mut gen = Vec::new();
        let mut feed = Vec::new();
        let mut decay = vec![0.0; dim];
        for (j, col) in states.iter().enumerate() {
            hamiltonian_column(&r, space, drive, col, |row, kind, v| {
                let i = local[n][&row];
                match kind {
                    TermKind::Static => gen.push((i, j, -I * v)),
                    TermKind::SourceDecay => decay[i] += (-I * v).re,
                    TermKind::SourceFeed => feed.push((i, j, -I * v)),
                }
            });
        }

        let mut jumps = Vec::new();
        if n > 0 {
            let below = all_states[n - 1].len();
            let mut fixed: HashMap<JumpChannel, Vec<_>> = HashMap::new();
            let mut source: HashMap<JumpChannel, Vec<_>> = HashMap::new();
            for (j, col) in states.iter().enumerate() {
                jump_column(&r, drive, col, |ch, row, kind, v| {
                    let i = local[n - 1][&row];
                    let target = if kind == TermKind::SourceFeed {
                        &mut source
                    } else {
                        &mut fixed
                    };
                    target.entry(ch).or_default().push((i, j, v));
                });
            }
            for ch in JumpChannel::ALL {
                let f = fixed.remove(&ch).unwrap_or_default();
                let s = source.remove(&ch);
                if f.is_empty() && s.is_none() {
                    continue;
                }
                jumps.push(SectorJump {
                    channel: ch,
                    fixed: Csr::from_triplets(below, dim, f),
                    source: s.map(|t| Csr::from_triplets(below, dim, t)),
                });
            }
        }

        sectors.push(Sector {
            n,
            states: states.clone(),
            generator: Csr::from_triplets(dim, dim, gen),
            source_decay: decay,
            source_feed: Csr::from_triplets(dim, dim, feed),
            jumps,
        });
    }
    Ok(sectors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::AtomLevel::*;
    use proptest::prelude::*;

    fn space() -> HilbertSpace {
        HilbertSpace::new(2, 2, 2).unwrap()
    }

    fn max_abs(m: &DMatrix<Complex64>) -> f64 {
        m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn matrix_element_readout() {
        let p = SystemParams::experiment();
        let s = space();
        let h = build_effective_hamiltonian(&p, &s).unwrap();
        let e = s
            .index(&BasisState {
                atom: Excited,
                na: 0,
                nb: 0,
                ns: 0,
            })
            .unwrap();
        let g1 = s
            .index(&BasisState {
                atom: GMinus,
                na: 1,
                nb: 0,
                ns: 0,
            })
            .unwrap();
        let expect = 2.0 * std::f64::consts::PI * 1e-3 * p.g;
        assert!((h[(e, g1)] - Complex64::new(expect, 0.0)).norm() < 1e-15);
        assert!((h[(g1, e)] - Complex64::new(expect, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn decoupled_plus_state() {
        let p = SystemParams::experiment().without_parasitics();
        let s = space();
        let h = build_effective_hamiltonian_with(&p, &s, Direction::Rightward, 0.01).unwrap();
        // G_PLUS with photons only in the forward mode never couples to the atom.
        let e0 = s
            .index(&BasisState {
                atom: Excited,
                na: 0,
                nb: 0,
                ns: 0,
            })
            .unwrap();
        for na in 1..=2 {
            let idx = s
                .index(&BasisState {
                    atom: GPlus,
                    na,
                    nb: 0,
                    ns: 0,
                })
                .unwrap();
            for row in 0..s.dimension() {
                let st = s.decompose(row).unwrap();
                if st.atom == Excited {
                    assert_eq!(h[(row, idx)], Complex64::new(0.0, 0.0), "row {st:?}");
                }
            }
            assert_eq!(h[(e0, idx)], Complex64::new(0.0, 0.0));
        }
    }

    /// H_eff − H_eff† = −i Σ C†C: the non-Hermitian part is exactly the
    /// jump-operator sum.
    #[test]
    fn effective_hamiltonian_matches_jump_operators() {
        let p = SystemParams::experiment();
        let s = space();
        for drive in [Direction::Rightward, Direction::Leftward] {
            let ks = 0.05;
            let h = build_effective_hamiltonian_with(&p, &s, drive, ks).unwrap();
            let ops = build_jump_operators(&p, &s, drive, ks).unwrap();
            let mut sum = DMatrix::<Complex64>::zeros(s.dimension(), s.dimension());
            for (_, c) in &ops {
                sum += c.adjoint() * c;
            }
            let lhs = &h - h.adjoint();
            let rhs = sum * Complex64::new(0.0, -1.0);
            assert!(max_abs(&(lhs - rhs)) < 1e-14);
        }
    }

    #[test]
    fn anti_hermitian_part_is_passive() {
        let p = SystemParams::experiment();
        let s = space();
        let h = build_effective_hamiltonian_with(&p, &s, Direction::Rightward, 0.2).unwrap();
        // (H − H†)/(2i) is Hermitian; its eigenvalues must be ≤ 0.
        let anti = (&h - h.adjoint()) * Complex64::new(0.0, -0.5);
        let eig = anti.symmetric_eigen();
        for &l in eig.eigenvalues.iter() {
            assert!(l <= 1e-12, "eigenvalue {l}");
        }
    }

    #[test]
    fn dense_guard_trips() {
        let s = HilbertSpace::new(20, 20, 20).unwrap();
        let p = SystemParams::experiment();
        assert!(matches!(
            build_effective_hamiltonian(&p, &s),
            Err(Error::DimensionOverflow { .. })
        ));
    }

    /// Sector blocks reproduce the dense generator restricted to each sector.
    #[test]
    fn sectors_match_dense() {
        let p = SystemParams::experiment();
        let s = space();
        let ks = 0.07;
        for drive in [Direction::Rightward, Direction::Leftward] {
            let h = build_effective_hamiltonian_with(&p, &s, drive, ks).unwrap();
            let ops = build_jump_operators(&p, &s, drive, ks).unwrap();
            let sectors = build_sectors(&p, &s, drive, 3).unwrap();
            for sec in &sectors {
                let d = sec.dim();
                for j in 0..d {
                    let mut x = vec![Complex64::new(0.0, 0.0); d];
                    x[j] = Complex64::new(1.0, 0.0);
                    let mut y = vec![Complex64::new(0.0, 0.0); d];
                    sec.derivative(ks, &x, &mut y);
                    let gj = s.index(&sec.states[j]).unwrap();
                    for (i, st) in sec.states.iter().enumerate() {
                        let gi = s.index(st).unwrap();
                        let expect = -I * h[(gi, gj)];
                        assert!((y[i] - expect).norm() < 1e-15);
                    }
                    if sec.n == 0 {
                        continue;
                    }
                    let below = &sectors[sec.n - 1];
                    for (k, sj) in sec.jumps.iter().enumerate() {
                        let mut out = vec![Complex64::new(0.0, 0.0); below.dim()];
                        sec.apply_jump(k, ks, &x, &mut out);
                        let dense = &ops.iter().find(|(c, _)| *c == sj.channel).unwrap().1;
                        for (i, st) in below.states.iter().enumerate() {
                            let gi = s.index(st).unwrap();
                            assert!((out[i] - dense[(gi, gj)]).norm() < 1e-15);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn csr_sums_duplicates() {
        let one = Complex64::new(1.0, 0.0);
        let m = Csr::from_triplets(2, 2, vec![(0, 1, one), (0, 1, one), (1, 0, one)]);
        assert_eq!(m.nnz(), 2);
        let mut y = vec![Complex64::new(0.0, 0.0); 2];
        m.apply(&[one, one * 3.0], &mut y);
        assert_eq!(y, vec![one * 6.0, one]);
    }

    proptest! {
        #[test]
        fn passive_for_random_rates(
            g in 0.0f64..40.0, ki in 0.0f64..20.0, kex in 0.0f64..40.0, h in 0.0f64..5.0,
            gamma in 0.0f64..6.0, ks in 0.0f64..1.0,
        ) {
            let (gm, gp) = crate::model::parasitic_couplings(g);
            let p = SystemParams { g, g_minus: gm, g_pi: gp, kappa_i: ki, kappa_ex: kex, h, gamma, kappa_s: 0.0 };
            let s = HilbertSpace::new(1, 1, 2).unwrap();
            let hm = build_effective_hamiltonian_with(&p, &s, Direction::Rightward, ks).unwrap();
            let anti = (&hm - hm.adjoint()) * Complex64::new(0.0, -0.5);
            for &l in anti.symmetric_eigen().eigenvalues.iter() {
                prop_assert!(l <= 1e-12);
            }
        }
    }
}
