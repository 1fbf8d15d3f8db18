//! Cycle-level model of the R×C sparse systolic tensor array.
//!
//! Weights are stationary. Activation blocks of `m` elements enter every
//! row from the west and move one TPE east per clock. Partial sums move one
//! TPE south per clock and leave through a per-column edge accumulator.
//!
//! Each TPE owns four register classes: `m` activation registers, `n`
//! weight registers, `n` weight-index registers and one output register.
//! The south edge adds one accumulator per column. A stuck-at fault forces
//! one bit of one register. It is applied every time the register is read,
//! so the forcing is visible to the TPE's own logic and to every neighbour
//! that latches from it.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::arith::{self, width_mask, Word};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::sparsity::SparseWeightTile;

/// Which weight slots of a TPE take part in the computation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SparsityMode {
    /// All `n` slots active (N:M, e.g. 2:4).
    Full,
    /// Only slot 0 active; the second multiplier is gated off (1:M).
    Single,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArrayConfig {
    pub rows: usize,
    pub cols: usize,
    /// Activation block length M.
    pub m: usize,
    /// Physical weight slots per TPE.
    pub n: usize,
    pub data_width: u32,
    pub acc_width: u32,
    pub mode: SparsityMode,
}

impl Default for ArrayConfig {
    /// 8×8 array, 2:4 sparsity, 16-bit data, 32-bit accumulation.
    fn default() -> Self {
        ArrayConfig {
            rows: 8,
            cols: 8,
            m: 4,
            n: 2,
            data_width: 16,
            acc_width: 32,
            mode: SparsityMode::Full,
        }
    }
}

impl ArrayConfig {
    pub fn new(rows: usize, cols: usize, m: usize, n: usize) -> Self {
        ArrayConfig {
            rows,
            cols,
            m,
            n,
            ..ArrayConfig::default()
        }
    }

    pub fn with_mode(mut self, mode: SparsityMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_widths(mut self, data_width: u32, acc_width: u32) -> Self {
        self.data_width = data_width;
        self.acc_width = acc_width;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::Config("array needs at least one row and column".into()));
        }
        if self.m == 0 || self.m > 64 {
            return Err(Error::Config(format!("block size m = {} outside 1..=64", self.m)));
        }
        if self.n == 0 || self.n > self.m {
            return Err(Error::Config(format!("n = {} must be in 1..=m ({})", self.n, self.m)));
        }
        for w in [self.data_width, self.acc_width] {
            if w == 0 || w > arith::MAX_WIDTH {
                return Err(Error::InvalidWidth(w));
            }
        }
        if self.acc_width < self.data_width {
            return Err(Error::Config("acc_width must be at least data_width".into()));
        }
        Ok(())
    }

    /// Number of weight slots that feed the adder.
    pub fn active_slots(&self) -> usize {
        match self.mode {
            SparsityMode::Full => self.n,
            SparsityMode::Single => 1,
        }
    }

    /// `ceil(log2 m)`, at least one bit.
    pub fn index_width(&self) -> u32 {
        (usize::BITS - (self.m - 1).leading_zeros()).max(1)
    }

    pub fn register_width(&self, class: RegClass) -> u32 {
        match class {
            RegClass::Activation | RegClass::Weight => self.data_width,
            RegClass::WeightIndex => self.index_width(),
            RegClass::Output | RegClass::EdgeAccumulator => self.acc_width,
        }
    }

    /// Registers of `class` per TPE (per column for the edge accumulator).
    pub fn elements(&self, class: RegClass) -> usize {
        match class {
            RegClass::Activation => self.m,
            RegClass::Weight | RegClass::WeightIndex => self.n,
            RegClass::Output | RegClass::EdgeAccumulator => 1,
        }
    }

    /// Short label such as `2:4`.
    pub fn sparsity_label(&self) -> String {
        format!("{}:{}", self.active_slots(), self.m)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RegClass {
    Activation,
    Weight,
    WeightIndex,
    Output,
    EdgeAccumulator,
}

impl RegClass {
    pub const ALL: [RegClass; 5] = [
        RegClass::Activation,
        RegClass::Weight,
        RegClass::WeightIndex,
        RegClass::Output,
        RegClass::EdgeAccumulator,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RegClass::Activation => "activation",
            RegClass::Weight => "weight",
            RegClass::WeightIndex => "index",
            RegClass::Output => "output",
            RegClass::EdgeAccumulator => "edge",
        }
    }
}

impl fmt::Display for RegClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RegClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "activation" | "act" => RegClass::Activation,
            "weight" => RegClass::Weight,
            "index" | "weight_index" | "weightindex" => RegClass::WeightIndex,
            "output" | "out" => RegClass::Output,
            "edge" | "edge_accumulator" | "accumulator" => RegClass::EdgeAccumulator,
            other => return Err(Error::Parse(format!("unknown register class `{other}`"))),
        })
    }
}

/// One stuck-at fault.
///
/// Text form: `class:row:col:element:bit:stuck`, e.g. `weight:3:5:1:7:1`.
/// Edge-accumulator faults ignore `row` and `element`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FaultSite {
    pub class: RegClass,
    pub row: usize,
    pub col: usize,
    pub element: usize,
    pub bit: u32,
    pub stuck: bool,
}

impl FaultSite {
    pub fn new(class: RegClass, row: usize, col: usize, element: usize, bit: u32, stuck: bool) -> Self {
        FaultSite {
            class,
            row,
            col,
            element,
            bit,
            stuck,
        }
    }

    pub fn validate(&self, config: &ArrayConfig) -> Result<()> {
        let bad = |msg: String| Err(Error::FaultSite(format!("{self}: {msg}")));
        if self.col >= config.cols {
            return bad(format!("column outside 0..{}", config.cols));
        }
        if self.class != RegClass::EdgeAccumulator && self.row >= config.rows {
            return bad(format!("row outside 0..{}", config.rows));
        }
        let elements = config.elements(self.class);
        if self.element >= elements {
            return bad(format!("element outside 0..{elements}"));
        }
        let width = config.register_width(self.class);
        if self.bit >= width {
            return bad(format!("bit outside 0..{width}"));
        }
        Ok(())
    }
}

impl fmt::Display for FaultSite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}:{}:{}:{}:{}",
            self.class, self.row, self.col, self.element, self.bit, self.stuck as u8
        )
    }
}

impl FromStr for FaultSite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        if parts.len() != 6 {
            return Err(Error::Parse(format!(
                "fault spec `{s}` must be class:row:col:element:bit:stuck"
            )));
        }
        let num = |p: &str| -> Result<usize> {
            p.parse()
                .map_err(|_| Error::Parse(format!("`{p}` is not a non-negative integer in `{s}`")))
        };
        let stuck = match parts[5] {
            "0" => false,
            "1" => true,
            other => return Err(Error::Parse(format!("stuck value `{other}` must be 0 or 1"))),
        };
        Ok(FaultSite {
            class: parts[0].parse()?,
            row: num(parts[1])?,
            col: num(parts[2])?,
            element: num(parts[3])?,
            bit: num(parts[4])? as u32,
            stuck,
        })
    }
}

/// Register contents of one TPE as its logic sees them (faults applied).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TpeState {
    pub activation: Vec<Word>,
    pub weight: Vec<Word>,
    pub index: Vec<Word>,
    pub output: Word,
}

/// Per-column values latched at the bottom edge.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SouthOutputs(pub Vec<Word>);

impl SouthOutputs {
    pub fn values(&self) -> Vec<i64> {
        self.0.iter().map(|w| w.value()).collect()
    }
}

/// AND/OR pair that forces selected bits of a register output.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct ForceMask {
    and: u64,
    or: u64,
}

impl ForceMask {
    const CLEAR: ForceMask = ForceMask { and: u64::MAX, or: 0 };

    #[inline]
    fn apply(self, w: Word) -> Word {
        Word::from_bits((w.bits() & self.and) | self.or, w.width())
    }

    fn force(&mut self, bit: u32, stuck: bool) {
        if stuck {
            self.or |= 1 << bit;
            self.and |= 1 << bit;
        } else {
            self.and &= !(1 << bit);
            self.or &= !(1 << bit);
        }
    }
}

/// Cycles a weight load occupies: one array row shifted in per clock.
pub fn load_cycles(config: &ArrayConfig) -> u64 {
    config.rows as u64
}

/// Cycles `run_compute` takes to stream `rows` activation rows and drain.
pub fn compute_cycles(config: &ArrayConfig, rows: usize) -> u64 {
    if rows == 0 {
        0
    } else {
        (rows + config.rows + config.cols - 1) as u64
    }
}

/// The array state machine. One instance is exclusively owned and mutated
/// by a single caller; independent instances can run on separate threads.
#[derive(Clone, Debug)]
pub struct SystolicArray {
    config: ArrayConfig,
    act: Vec<Word>,
    weight: Vec<Word>,
    index: Vec<Word>,
    out: Vec<Word>,
    edge: Vec<Word>,
    act_force: Vec<ForceMask>,
    weight_force: Vec<ForceMask>,
    index_force: Vec<ForceMask>,
    out_force: Vec<ForceMask>,
    edge_force: Vec<ForceMask>,
    faults: Vec<FaultSite>,
    loaded: bool,
    cycle: u64,
    west_scratch: Vec<i64>,
}

impl SystolicArray {
    pub fn new(config: ArrayConfig) -> Result<Self> {
        config.validate()?;
        let tpes = config.rows * config.cols;
        let (m, n) = (config.m, config.n);
        let dw = config.data_width;
        let aw = config.acc_width;
        Ok(SystolicArray {
            config,
            act: vec![Word::zero(dw); tpes * m],
            weight: vec![Word::zero(dw); tpes * n],
            index: vec![Word::zero(config.index_width()); tpes * n],
            out: vec![Word::zero(aw); tpes],
            edge: vec![Word::zero(aw); config.cols],
            act_force: vec![ForceMask::CLEAR; tpes * m],
            weight_force: vec![ForceMask::CLEAR; tpes * n],
            index_force: vec![ForceMask::CLEAR; tpes * n],
            out_force: vec![ForceMask::CLEAR; tpes],
            edge_force: vec![ForceMask::CLEAR; config.cols],
            faults: Vec::new(),
            loaded: false,
            cycle: 0,
            west_scratch: vec![0; config.rows * m],
        })
    }

    pub fn config(&self) -> &ArrayConfig {
        &self.config
    }

    /// Total clocks simulated so far, weight loads included.
    pub fn cycle(&self) -> u64 {
        self.cycle
    }

    pub fn faults(&self) -> &[FaultSite] {
        &self.faults
    }

    pub fn is_loaded(&self) -> bool {
        self.loaded
    }

    #[inline]
    fn tpe_index(&self, row: usize, col: usize) -> usize {
        row * self.config.cols + col
    }

    #[inline]
    fn read_act(&self, row: usize, col: usize, e: usize) -> Word {
        let k = self.tpe_index(row, col) * self.config.m + e;
        self.act_force[k].apply(self.act[k])
    }

    #[inline]
    fn read_weight(&self, row: usize, col: usize, slot: usize) -> Word {
        let k = self.tpe_index(row, col) * self.config.n + slot;
        self.weight_force[k].apply(self.weight[k])
    }

    #[inline]
    fn read_index(&self, row: usize, col: usize, slot: usize) -> Word {
        let k = self.tpe_index(row, col) * self.config.n + slot;
        self.index_force[k].apply(self.index[k])
    }

    #[inline]
    fn read_out(&self, row: usize, col: usize) -> Word {
        let k = self.tpe_index(row, col);
        self.out_force[k].apply(self.out[k])
    }

    #[inline]
    fn read_edge(&self, col: usize) -> Word {
        self.edge_force[col].apply(self.edge[col])
    }

    /// Register contents of TPE (`row`, `col`) as read through any active
    /// faults.
    pub fn tpe(&self, row: usize, col: usize) -> TpeState {
        let c = &self.config;
        TpeState {
            activation: (0..c.m).map(|e| self.read_act(row, col, e)).collect(),
            weight: (0..c.n).map(|k| self.read_weight(row, col, k)).collect(),
            index: (0..c.n).map(|k| self.read_index(row, col, k)).collect(),
            output: self.read_out(row, col),
        }
    }

    /// Current (faulted) value of the south-edge accumulator of `col`.
    pub fn edge_accumulator(&self, col: usize) -> Word {
        self.read_edge(col)
    }

    /// Shifts a weight tile into the array. Activation, output and edge
    /// registers are cleared. Returns the cycles consumed.
    pub fn load_weights(&mut self, tile: &SparseWeightTile) -> Result<u64> {
        let c = self.config;
        if tile.rows() != c.rows || tile.cols() != c.cols {
            return Err(Error::Shape(format!(
                "tile grid {}x{} does not match a {}x{} array",
                tile.rows(),
                tile.cols(),
                c.rows,
                c.cols
            )));
        }
        if tile.m() != c.m || tile.n() != c.active_slots() {
            return Err(Error::Shape(format!(
                "tile is {}:{} but the array runs {}",
                tile.n(),
                tile.m(),
                c.sparsity_label()
            )));
        }
        for b in tile.blocks() {
            if let Some(&v) = b.values.iter().find(|&&v| !arith::fits(v, c.data_width)) {
                return Err(Error::Overflow {
                    value: v,
                    width: c.data_width,
                });
            }
        }
        let iw = c.index_width();
        for i in 0..c.rows {
            for j in 0..c.cols {
                let block = tile.block(i, j);
                let base = self.tpe_index(i, j) * c.n;
                for k in 0..c.n {
                    let (v, p) = if k < block.n() {
                        (block.values[k], block.indexes[k])
                    } else {
                        (0, 0)
                    };
                    self.weight[base + k] = Word::new(v, c.data_width);
                    self.index[base + k] = Word::from_bits(p as u64, iw);
                }
            }
        }
        self.act.fill(Word::zero(c.data_width));
        self.out.fill(Word::zero(c.acc_width));
        self.edge.fill(Word::zero(c.acc_width));
        self.loaded = true;
        let cycles = load_cycles(&c);
        self.cycle += cycles;
        Ok(cycles)
    }

    /// Activates a stuck-at fault on every subsequent read of its register.
    pub fn inject(&mut self, fault: FaultSite) -> Result<()> {
        fault.validate(&self.config)?;
        let (m, n) = (self.config.m, self.config.n);
        let t = self.tpe_index(fault.row.min(self.config.rows - 1), fault.col);
        let mask = match fault.class {
            RegClass::Activation => &mut self.act_force[t * m + fault.element],
            RegClass::Weight => &mut self.weight_force[t * n + fault.element],
            RegClass::WeightIndex => &mut self.index_force[t * n + fault.element],
            RegClass::Output => &mut self.out_force[t],
            RegClass::EdgeAccumulator => &mut self.edge_force[fault.col],
        };
        mask.force(fault.bit, fault.stuck);
        self.faults.push(fault);
        Ok(())
    }

    pub fn clear_faults(&mut self) {
        for masks in [
            &mut self.act_force,
            &mut self.weight_force,
            &mut self.index_force,
            &mut self.out_force,
            &mut self.edge_force,
        ] {
            masks.fill(ForceMask::CLEAR);
        }
        self.faults.clear();
    }

    /// Advances one clock.
    ///
    /// `west` holds one `m`-element block per row (`None` is a bubble, i.e.
    /// a zero block); `north` holds the sum input of each top-row TPE.
    /// With `test4_mask` asserted every weight slot in column `j` selects
    /// element `j mod m` instead of its stored index. Returns the bottom-row
    /// output registers as they stood before this clock.
    pub fn step(
        &mut self,
        west: &[Option<&[Word]>],
        north: &[Word],
        test4_mask: bool,
    ) -> Result<SouthOutputs> {
        let c = self.config;
        if !self.loaded {
            return Err(Error::NotLoaded);
        }
        if west.len() != c.rows || north.len() != c.cols {
            return Err(Error::Shape(format!(
                "step expects {} west blocks and {} north sums",
                c.rows, c.cols
            )));
        }
        let mut flat = std::mem::take(&mut self.west_scratch);
        flat.fill(0);
        for (i, block) in west.iter().enumerate() {
            if let Some(block) = block {
                if block.len() != c.m {
                    return Err(Error::Shape(format!("west block of {} elements, expected {}", block.len(), c.m)));
                }
                for (e, w) in block.iter().enumerate() {
                    flat[i * c.m + e] = w.value();
                }
            }
        }
        let north: Vec<i64> = north.iter().map(|w| w.value()).collect();
        let mut south = vec![Word::zero(c.acc_width); c.cols];
        self.clock(&flat, &north, test4_mask, &mut south);
        self.west_scratch = flat;
        Ok(SouthOutputs(south))
    }

    /// One clock on raw values. `west` is row-major `rows × m`.
    fn clock(&mut self, west: &[i64], north: &[i64], test4_mask: bool, south: &mut [Word]) {
        let c = self.config;
        let (m, dw, aw) = (c.m, c.data_width, c.acc_width);
        let active = c.active_slots();
        let index_mask = width_mask(c.index_width());

        for (j, s) in south.iter_mut().enumerate() {
            *s = self.read_out(c.rows - 1, j);
        }

        // activations move east; walk east-to-west so each TPE reads its
        // neighbour's value from the previous clock
        for i in 0..c.rows {
            for j in (1..c.cols).rev() {
                for e in 0..m {
                    let v = self.read_act(i, j - 1, e);
                    let k = self.tpe_index(i, j) * m + e;
                    self.act[k] = v;
                }
            }
            let k0 = self.tpe_index(i, 0) * m;
            for e in 0..m {
                self.act[k0 + e] = Word::new(west[i * m + e], dw);
            }
        }

        // partial sums move south; walk bottom-up for the same reason
        for i in (0..c.rows).rev() {
            for (j, &top) in north.iter().enumerate().take(c.cols) {
                let above = if i == 0 {
                    top as i128
                } else {
                    self.read_out(i - 1, j).value() as i128
                };
                let mut acc = above;
                for k in 0..active {
                    let sel = if test4_mask {
                        j % m
                    } else {
                        // the mux decodes its select input modulo m
                        ((self.read_index(i, j, k).bits() & index_mask) as usize) % m
                    };
                    let w = self.read_weight(i, j, k).value() as i128;
                    let a = self.read_act(i, j, sel).value() as i128;
                    acc += w * a;
                }
                let t = self.tpe_index(i, j);
                self.out[t] = Word::new(arith::wrap_to_width(acc, aw), aw);
            }
        }
        self.cycle += 1;
    }

    /// Latches `raw + addend` into the edge accumulator of `col` and returns
    /// the accumulator output. During normal compute the addend is zero;
    /// during a self-test it is the golden reference.
    pub fn edge_accumulate(&mut self, col: usize, raw: Word, addend: Word) -> Result<Word> {
        let aw = self.config.acc_width;
        if col >= self.config.cols {
            return Err(Error::Shape(format!("no edge accumulator at column {col}")));
        }
        let sum = raw.resize(aw).wrap_add(addend.resize(aw))?;
        self.edge[col] = sum;
        Ok(self.read_edge(col))
    }

    /// Holds the same west block on every row and the same north sum on
    /// every column until the pipeline settles, then returns the south
    /// outputs. Used by the self-test session.
    pub(crate) fn settle_broadcast(&mut self, block: &[i64], north: i64, test4_mask: bool) -> Vec<Word> {
        let c = self.config;
        let mut west = std::mem::take(&mut self.west_scratch);
        for i in 0..c.rows {
            west[i * c.m..(i + 1) * c.m].copy_from_slice(block);
        }
        let north = vec![north; c.cols];
        let mut south = vec![Word::zero(c.acc_width); c.cols];
        for _ in 0..c.rows + c.cols {
            self.clock(&west, &north, test4_mask, &mut south);
        }
        self.west_scratch = west;
        south
    }

    /// Streams the rows of `a` (X × R·m) through the loaded tile with the
    /// usual systolic skew: array row r sees its block r clocks late, and
    /// column j's result for input row x leaves the edge accumulator at
    /// clock x + R + j. Returns the X × C partial products and the clocks
    /// spent (X + R + C − 1).
    pub fn run_compute(&mut self, a: &Matrix) -> Result<(Matrix, u64)> {
        let c = self.config;
        if !self.loaded {
            return Err(Error::NotLoaded);
        }
        if a.cols() != c.rows * c.m {
            return Err(Error::Shape(format!(
                "activation tile has {} columns, expected {}",
                a.cols(),
                c.rows * c.m
            )));
        }
        if let Some(&v) = a.as_slice().iter().find(|&&v| !arith::fits(v, c.data_width)) {
            return Err(Error::Overflow {
                value: v,
                width: c.data_width,
            });
        }
        let x_rows = a.rows();
        let total = compute_cycles(&c, x_rows);
        let mut result = Matrix::zeros(x_rows, c.cols);
        let mut west = std::mem::take(&mut self.west_scratch);
        let north = vec![0i64; c.cols];
        let mut south = vec![Word::zero(c.acc_width); c.cols];
        let zero = Word::zero(c.acc_width);
        for t in 0..total as usize {
            for i in 0..c.rows {
                let dst = &mut west[i * c.m..(i + 1) * c.m];
                match t.checked_sub(i).filter(|&x| x < x_rows) {
                    Some(x) => dst.copy_from_slice(&a.row(x)[i * c.m..(i + 1) * c.m]),
                    None => dst.fill(0),
                }
            }
            self.clock(&west, &north, false, &mut south);
            for (j, &s) in south.iter().enumerate() {
                if let Some(x) = t.checked_sub(c.rows + j).filter(|&x| x < x_rows) {
                    let v = self.edge_accumulate(j, s, zero)?;
                    result.set(x, j, v.value());
                }
            }
        }
        self.west_scratch = west;
        Ok((result, total))
    }
}
