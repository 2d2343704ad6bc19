use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::sync::mpsc::{Receiver, RecvTimeoutError};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    initial_value_guidance, CellDirectives, Control, Event, Incumbent, RestartKind, SearchConfig,
    SearchError, SearchOutcome, Status, Strategy, TimeModel,
};
use crate::constraints::{Cost, Family, IncrementalEvaluator};
use crate::model::{Instance, Kind, RequestEdit, Roster, ShiftIx};

/// Iterations per annealing cycle before the temperature reheats.
const CYCLE: u64 = 20_000;
const T_START: f64 = 2.0;
const T_END: f64 = 0.02;
/// Base of the positional weighting used to turn a key difference into an
/// annealing energy.
const LEVEL_BASE: f64 = 100.0;
/// Upper bound on greedy passes before annealing takes over.
const MAX_DESCENT_PASSES: u32 = 50;
/// Chance that a reassignment under LNPS proposes the prioritized value.
const GUIDE_PROB: f64 = 0.3;
/// Annealing iterations without a new incumbent before the trajectory is
/// perturbed from the incumbent.
const KICK_AFTER: u64 = 2 * CYCLE;

type Change = (usize, i32, ShiftIx);

enum Phase {
    /// Greedy best-value passes over cells in `order`.
    Descent { order: Vec<(usize, i32)>, pos: usize, improved: bool, passes: u32 },
    Anneal,
}

struct Clock {
    model: TimeModel,
    start: Instant,
    paused: Duration,
    paused_at: Option<Instant>,
}

impl Clock {
    fn new(model: TimeModel) -> Self {
        Clock { model, start: Instant::now(), paused: Duration::ZERO, paused_at: None }
    }

    fn elapsed(&self, ticks: u64) -> f64 {
        match self.model {
            TimeModel::Iterations { per_second } => ticks as f64 / per_second as f64,
            TimeModel::Wall => {
                let now = self.paused_at.unwrap_or_else(Instant::now);
                (now - self.start - self.paused).as_secs_f64()
            }
        }
    }

    fn pause(&mut self) {
        self.paused_at.get_or_insert_with(Instant::now);
    }

    fn resume(&mut self) {
        if let Some(at) = self.paused_at.take() {
            self.paused += at.elapsed();
        }
    }
}

/// Search state. Owned by a single worker; see [`super::solve`] for the
/// usual driver and [`Engine::run`] for the loop.
pub struct Engine {
    inst: Arc<Instance>,
    cfg: SearchConfig,
    directives: CellDirectives,
    ev: IncrementalEvaluator,
    len: usize,
    first_day: i32,
    fixed: Vec<bool>,
    cleared: Vec<bool>,
    free: Vec<(usize, i32)>,
    is_free: Vec<bool>,
    guide: Vec<Option<ShiftIx>>,
    reference: Vec<Option<ShiftIx>>,
    ref_count: usize,
    ref_mm: usize,
    guide_mm: usize,
    rng: ChaCha8Rng,
    phase: Phase,
    mp_slot: Option<usize>,
    cur_key: Vec<u64>,
    cand_key: Vec<u64>,
    best: Option<Incumbent>,
    clock: Clock,
    ticks: u64,
    iterations: u64,
    cycle: u64,
    stall: u64,
    epoch: u64,
    sequence: u64,
    published: u64,
    auto_restarts: u32,
    manual_restarts: u32,
    last_improvement: f64,
    min_hard: u64,
    stopped: bool,
}

impl Engine {
    pub fn new(
        instance: Arc<Instance>,
        config: SearchConfig,
        directives: &CellDirectives,
    ) -> Result<Engine, SearchError> {
        config.validate()?;
        let resolved = directives.resolve(&instance)?;
        let nurses = instance.nurse_count();
        let first_day = instance.first_day();
        let len = (instance.end_day() - first_day) as usize;
        let cells = nurses * len;
        let idx = |n: usize, d: i32| n * len + (d - first_day) as usize;

        let mut fixed = vec![false; cells];
        let mut reference = vec![None; cells];
        let mut cleared = vec![false; cells];
        let mut core: BTreeMap<(usize, i32), ShiftIx> = BTreeMap::new();
        for a in &resolved.fixed {
            fixed[idx(a.nurse, a.day)] = true;
            core.insert((a.nurse, a.day), a.shift);
        }
        for a in &resolved.prioritized {
            reference[idx(a.nurse, a.day)] = Some(a.shift);
        }
        for &(n, d) in &resolved.cleared {
            cleared[idx(n, d)] = true;
        }
        let mut seeded = vec![false; cells];
        if config.strategy.seeds_prioritized() {
            for a in initial_value_guidance(&resolved.prioritized).seeds {
                core.insert((a.nurse, a.day), a.shift);
                seeded[idx(a.nurse, a.day)] = true;
            }
        }
        for n in 0..nurses {
            for d in 0..instance.end_day() {
                if !core.contains_key(&(n, d)) && instance.rest_completion(n, d).is_none() {
                    core.insert((n, d), instance.cell_domain(n, d).expect("decision day")[0]);
                }
            }
        }
        let roster = instance.complete(&core).expect("directive values are validated");
        let soften = config.soften_hard;
        let ev = IncrementalEvaluator::new(instance.clone(), roster, soften);
        let rng = ChaCha8Rng::seed_from_u64(config.random_seed);
        let clock = Clock::new(config.time_model);
        let guide = reference.clone();
        let ref_count = resolved.prioritized.len();
        let mut engine = Engine {
            inst: instance,
            cfg: config,
            directives: directives.clone(),
            ev,
            len,
            first_day,
            fixed,
            cleared,
            free: Vec::new(),
            is_free: vec![false; cells],
            guide,
            reference,
            ref_count,
            ref_mm: 0,
            guide_mm: 0,
            rng,
            phase: Phase::Anneal,
            mp_slot: None,
            cur_key: Vec::new(),
            cand_key: Vec::new(),
            best: None,
            clock,
            ticks: 0,
            iterations: 0,
            cycle: 0,
            stall: 0,
            epoch: 0,
            sequence: 0,
            published: 0,
            auto_restarts: 0,
            manual_restarts: 0,
            last_improvement: 0.0,
            min_hard: u64::MAX,
            stopped: false,
        };
        engine.refresh_free();
        engine.recount();
        let mut first: Vec<(usize, i32)> =
            engine.free.iter().copied().filter(|&(n, d)| !seeded[idx(n, d)]).collect();
        first.shuffle(&mut engine.rng);
        engine.phase = Phase::Descent { order: first, pos: 0, improved: false, passes: 0 };
        Ok(engine)
    }

    /// Replaces the starting roster, e.g. to continue from an incumbent of
    /// an earlier run. Fixed cells keep their directive values and the
    /// search begins with a greedy descent from `roster`.
    pub fn warm_start(&mut self, roster: &Roster) -> Result<(), SearchError> {
        roster.check(&self.inst).map_err(|e| SearchError::Config(format!("warm start roster: {e}")))?;
        let resolved = self.directives.resolve(&self.inst)?;
        let mut r = roster.clone();
        for a in &resolved.fixed {
            r.set(a.nurse, a.day, a.shift);
        }
        self.ev.reset(r);
        self.recount();
        let mut order = self.free.clone();
        order.shuffle(&mut self.rng);
        self.phase = Phase::Descent { order, pos: 0, improved: false, passes: 0 };
        Ok(())
    }

    fn idx(&self, n: usize, d: i32) -> usize {
        n * self.len + (d - self.first_day) as usize
    }

    fn refresh_free(&mut self) {
        self.free.clear();
        self.is_free.iter_mut().for_each(|f| *f = false);
        for n in 0..self.inst.nurse_count() {
            for d in 0..self.inst.end_day() {
                let i = self.idx(n, d);
                let dom = self.inst.cell_domain(n, d).expect("decision day");
                if !self.fixed[i] && dom.len() > 1 {
                    self.free.push((n, d));
                    self.is_free[i] = true;
                }
            }
        }
    }

    /// Recomputes mismatch counts and the current key from scratch.
    fn recount(&mut self) {
        let roster = self.ev.roster();
        let mut ref_mm = 0;
        let mut guide_mm = 0;
        for (i, &s) in roster.cells().iter().enumerate() {
            ref_mm += usize::from(self.reference[i].is_some_and(|v| v != s));
            guide_mm += usize::from(self.guide[i].is_some_and(|v| v != s));
        }
        self.ref_mm = ref_mm;
        self.guide_mm = guide_mm;
        self.mp_slot = self.compute_mp_slot();
        let mut key = Vec::new();
        self.fill_key(&mut key, self.ev.cost(), ref_mm);
        self.cur_key = key;
        self.min_hard = self.min_hard.min(self.ev.hard_weight());
    }

    /// Where the modification count sits among the penalty slots. Hard
    /// levels always come first; unless they are softened the count never
    /// rises above them, so every published incumbent still orders by the
    /// configured position.
    fn compute_mp_slot(&self) -> Option<usize> {
        let c = self.inst.compiled();
        let levels = c.levels.len();
        let hard_levels = Family::ALL
            .iter()
            .filter_map(|&f| c.slot(Kind::Hard, f))
            .map(|s| s + 1)
            .max()
            .unwrap_or(0);
        self.cfg.strategy.mp_priority().map(|p| {
            let pos = p.slot_position(levels);
            if self.ev.soften_hard() {
                pos
            } else {
                pos.max(hard_levels)
            }
        })
    }

    fn fill_key(&self, out: &mut Vec<u64>, cost: &Cost, mm: usize) {
        out.clear();
        let mp = self.mp_slot;
        for (i, &w) in cost.slots().iter().enumerate() {
            if mp == Some(i) {
                out.push(mm as u64);
            }
            out.push(w);
        }
        if mp == Some(cost.slots().len()) {
            out.push(mm as u64);
        }
    }

    fn lnps(&self) -> bool {
        matches!(self.cfg.strategy, Strategy::Lnps { .. })
    }

    /// Mismatch deltas (reference, guidance) of applying `changes`.
    fn mm_delta(&self, changes: &[Change]) -> (isize, isize) {
        let roster = self.ev.roster();
        let mut dr = 0isize;
        let mut dg = 0isize;
        for &(n, d, s) in changes {
            let i = self.idx(n, d);
            let old = roster.get(n, d);
            let diff = |v: Option<ShiftIx>, x: ShiftIx| isize::from(v.is_some_and(|v| v != x));
            dr += diff(self.reference[i], s) - diff(self.reference[i], old);
            dg += diff(self.guide[i], s) - diff(self.guide[i], old);
        }
        (dr, dg)
    }

    fn elapsed(&self) -> f64 {
        self.clock.elapsed(self.ticks)
    }

    pub fn instance(&self) -> &Arc<Instance> {
        &self.inst
    }

    pub fn roster(&self) -> &Roster {
        self.ev.roster()
    }

    pub fn best(&self) -> Option<&Incumbent> {
        self.best.as_ref()
    }

    /// The key of the current trajectory point.
    pub fn key(&self) -> &[u64] {
        &self.cur_key
    }

    pub fn automatic_restarts(&self) -> u32 {
        self.auto_restarts
    }

    pub fn manual_restarts(&self) -> u32 {
        self.manual_restarts
    }

    pub fn directives(&self) -> &CellDirectives {
        &self.directives
    }

    /// Current guidance values, one per cell in roster layout.
    pub fn guidance(&self) -> &[Option<ShiftIx>] {
        &self.guide
    }

    pub fn is_fixed(&self, nurse: usize, day: i32) -> bool {
        self.fixed[self.idx(nurse, day)]
    }

    pub fn is_cleared(&self, nurse: usize, day: i32) -> bool {
        self.cleared[self.idx(nurse, day)]
    }

    pub fn soften_hard(&self) -> bool {
        self.ev.soften_hard()
    }

    fn publish(&mut self, sink: &mut dyn FnMut(&Event), force: bool) {
        let acceptable = self.ev.soften_hard() || self.ev.hard_weight() == 0;
        let better = match &self.best {
            None => true,
            Some(b) => self.cur_key < b.key,
        };
        if !force && !(acceptable && better) {
            return;
        }
        self.sequence += 1;
        self.published += 1;
        let now = self.elapsed();
        self.last_improvement = now;
        let inc = Incumbent {
            sequence: self.sequence,
            epoch: self.epoch,
            wall_time_seconds: now,
            roster: self.ev.roster().clone(),
            penalties: self.ev.penalties(),
            hard_weight: self.ev.hard_weight(),
            modification_count: self.ref_mm,
            prioritized_count: self.ref_count,
            key: self.cur_key.clone(),
        };
        sink(&Event::Incumbent(inc.clone()));
        self.best = Some(inc);
        self.stall = 0;
    }

    fn is_done(&self) -> bool {
        self.cur_key.iter().all(|&x| x == 0) || self.free.is_empty()
    }

    /// One unit of work: a greedy cell decision or an annealing move.
    pub fn step(&mut self, sink: &mut dyn FnMut(&Event)) {
        self.iterations += 1;
        let next = match &mut self.phase {
            Phase::Anneal => None,
            Phase::Descent { order, pos, improved, passes } => {
                if *pos < order.len() {
                    *pos += 1;
                    Some(Ok(order[*pos - 1]))
                } else {
                    Some(Err((*improved, *passes + 1)))
                }
            }
        };
        match next {
            None => {
                self.stall += 1;
                if self.stall >= KICK_AFTER {
                    self.kick();
                } else {
                    self.anneal_step();
                }
                self.publish(sink, false);
            }
            Some(Ok((n, d))) => {
                if self.greedy_cell(n, d) {
                    if let Phase::Descent { improved, .. } = &mut self.phase {
                        *improved = true;
                    }
                }
            }
            Some(Err((improved, passes))) => {
                if passes == 1 || (improved && passes < MAX_DESCENT_PASSES) {
                    let mut order = self.free.clone();
                    order.shuffle(&mut self.rng);
                    self.phase = Phase::Descent { order, pos: 0, improved: false, passes };
                } else {
                    self.phase = Phase::Anneal;
                    self.cycle = 0;
                }
                self.publish(sink, false);
            }
        }
    }

    /// Sets the cell to its best value. Returns whether the key (or, under
    /// LNPS, the guidance mismatch at an equal key) improved.
    fn greedy_cell(&mut self, n: usize, d: i32) -> bool {
        let cur = self.ev.roster().get(n, d);
        let dom: Vec<ShiftIx> = self.inst.cell_domain(n, d).expect("decision day").to_vec();
        let start = self.rng.random_range(0..dom.len());
        let mut best: Option<(Vec<u64>, usize, ShiftIx)> = None;
        let mut buf = Vec::new();
        for k in 0..dom.len() {
            let v = dom[(start + k) % dom.len()];
            if v == cur {
                continue;
            }
            let change = [(n, d, v)];
            let (dr, dg) = self.mm_delta(&change);
            let ref_mm = (self.ref_mm as isize + dr) as usize;
            let guide_mm = (self.guide_mm as isize + dg) as usize;
            self.ticks += 1;
            let cand = self.ev.propose(&change).clone();
            self.ev.rollback();
            self.fill_key(&mut buf, &cand, ref_mm);
            let tie = if self.lnps() { guide_mm } else { 0 };
            let replace = match &best {
                None => true,
                Some((bk, bt, _)) => (&buf, tie) < (bk, *bt),
            };
            if replace {
                best = Some((buf.clone(), tie, v));
            }
        }
        let Some((key, tie, v)) = best else { return false };
        let cur_tie = if self.lnps() { self.guide_mm } else { 0 };
        if (&key, tie) < (&self.cur_key, cur_tie) {
            self.apply(&[(n, d, v)]);
            true
        } else {
            false
        }
    }

    fn apply(&mut self, changes: &[Change]) {
        let (dr, dg) = self.mm_delta(changes);
        self.ev.apply(changes);
        self.ref_mm = (self.ref_mm as isize + dr) as usize;
        self.guide_mm = (self.guide_mm as isize + dg) as usize;
        let mut key = std::mem::take(&mut self.cur_key);
        self.fill_key(&mut key, self.ev.cost(), self.ref_mm);
        self.cur_key = key;
        self.min_hard = self.min_hard.min(self.ev.hard_weight());
    }

    fn temperature(&self) -> f64 {
        let p = self.cur_key.len();
        let top = self.cur_key.iter().position(|&x| x > 0).unwrap_or(p);
        let scale = LEVEL_BASE.powi(p.saturating_sub(top + 1) as i32);
        let phase = (self.cycle % CYCLE) as f64 / CYCLE as f64;
        scale * T_START * (T_END / T_START).powf(phase)
    }

    fn anneal_step(&mut self) {
        self.cycle += 1;
        let Some(changes) = self.pick_move() else { return };
        let (dr, dg) = self.mm_delta(&changes);
        let ref_mm = (self.ref_mm as isize + dr) as usize;
        let guide_mm = (self.guide_mm as isize + dg) as usize;
        self.ticks += 1;
        let cand = self.ev.propose(&changes).clone();
        let mut buf = std::mem::take(&mut self.cand_key);
        self.fill_key(&mut buf, &cand, ref_mm);
        let accept = match buf.cmp(&self.cur_key) {
            Ordering::Less => true,
            Ordering::Equal => !self.lnps() || guide_mm <= self.guide_mm,
            Ordering::Greater => {
                let p = buf.len();
                let energy: f64 = buf
                    .iter()
                    .zip(&self.cur_key)
                    .enumerate()
                    .map(|(i, (&a, &b))| (a as f64 - b as f64) * LEVEL_BASE.powi((p - 1 - i) as i32))
                    .sum();
                energy <= 0.0 || self.rng.random::<f64>() < (-energy / self.temperature()).exp()
            }
        };
        if accept {
            self.ev.commit();
            self.ref_mm = ref_mm;
            self.guide_mm = guide_mm;
            std::mem::swap(&mut self.cur_key, &mut buf);
            self.min_hard = self.min_hard.min(cand.hard());
        } else {
            self.ev.rollback();
        }
        self.cand_key = buf;
    }

    /// Restarts from the incumbent with a random region reassigned, either a
    /// few days across all nurses or two nurses across the horizon, then
    /// descends greedily.
    fn kick(&mut self) {
        self.stall = 0;
        if self.free.is_empty() {
            return;
        }
        if let Some(b) = &self.best {
            self.ev.reset(b.roster.clone());
            self.recount();
        }
        let days = self.len as i32;
        let region: Vec<(usize, i32)> = if self.rng.random::<f64>() < 0.5 {
            let width = self.rng.random_range(2..=3).min(days);
            let from = self.first_day + self.rng.random_range(0..=days - width);
            self.free.iter().copied().filter(|&(_, d)| d >= from && d < from + width).collect()
        } else {
            let a = self.free[self.rng.random_range(0..self.free.len())].0;
            let b = self.free[self.rng.random_range(0..self.free.len())].0;
            self.free.iter().copied().filter(|&(n, _)| n == a || n == b).collect()
        };
        let mut changes = Vec::with_capacity(region.len());
        for &(n, d) in &region {
            let dom = self.inst.cell_domain(n, d).expect("decision day");
            changes.push((n, d, dom[self.rng.random_range(0..dom.len())]));
        }
        self.apply(&changes);
        let mut order = region;
        order.shuffle(&mut self.rng);
        self.phase = Phase::Descent { order, pos: 0, improved: false, passes: 0 };
    }

    fn pick_move(&mut self) -> Option<Vec<Change>> {
        if self.free.is_empty() {
            return None;
        }
        let r: f64 = self.rng.random();
        if r < 0.3 {
            if let Some(m) = self.swap_move() {
                return Some(m);
            }
        } else if r < 0.45 {
            if let Some(m) = self.block_move() {
                return Some(m);
            }
        }
        Some(self.reassign_move())
    }

    fn reassign_move(&mut self) -> Vec<Change> {
        let (n, d) = self.free[self.rng.random_range(0..self.free.len())];
        let cur = self.ev.roster().get(n, d);
        if self.lnps() {
            if let Some(g) = self.guide[self.idx(n, d)] {
                if g != cur && self.rng.random::<f64>() < GUIDE_PROB {
                    return vec![(n, d, g)];
                }
            }
        }
        let dom = self.inst.cell_domain(n, d).expect("decision day");
        let mut v = dom[self.rng.random_range(0..dom.len() - 1)];
        if v == cur {
            v = dom[dom.len() - 1];
        }
        vec![(n, d, v)]
    }

    fn swap_move(&mut self) -> Option<Vec<Change>> {
        let nurses = self.inst.nurse_count();
        if nurses < 2 {
            return None;
        }
        let (n, d) = self.free[self.rng.random_range(0..self.free.len())];
        let mut m = self.rng.random_range(0..nurses - 1);
        if m >= n {
            m += 1;
        }
        if !self.is_free[self.idx(m, d)] {
            return None;
        }
        let roster = self.ev.roster();
        let (a, b) = (roster.get(n, d), roster.get(m, d));
        if a == b || !self.inst.in_domain(m, d, a) || !self.inst.in_domain(n, d, b) {
            return None;
        }
        Some(vec![(n, d, b), (m, d, a)])
    }

    fn block_move(&mut self) -> Option<Vec<Change>> {
        let days = self.inst.end_day();
        let k = self.rng.random_range(1..=3).min(days / 2);
        if k < 1 {
            return None;
        }
        let (n, _) = self.free[self.rng.random_range(0..self.free.len())];
        let d1 = self.rng.random_range(0..=days - k);
        let d2 = self.rng.random_range(0..=days - k);
        if (d1 - d2).abs() < k {
            return None;
        }
        let roster = self.ev.roster();
        let mut out = Vec::with_capacity(2 * k as usize);
        for i in 0..k {
            let (x, y) = (d1 + i, d2 + i);
            if !self.is_free[self.idx(n, x)] || !self.is_free[self.idx(n, y)] {
                return None;
            }
            let (a, b) = (roster.get(n, x), roster.get(n, y));
            if a == b {
                continue;
            }
            if !self.inst.in_domain(n, x, b) || !self.inst.in_domain(n, y, a) {
                return None;
            }
            out.push((n, x, b));
            out.push((n, y, a));
        }
        (!out.is_empty()).then_some(out)
    }

    /// LNPS restart: guidance becomes the incumbent, the trajectory restarts
    /// from it with fresh randomness.
    pub fn automatic_restart(&mut self) {
        let base = self.best.as_ref().map(|b| b.roster.clone()).unwrap_or_else(|| self.ev.roster().clone());
        for (i, g) in self.guide.iter_mut().enumerate() {
            *g = (!self.fixed[i] && !self.cleared[i]).then(|| base.cells()[i]);
        }
        self.ev.reset(base);
        self.auto_restarts += 1;
        let salt = (self.auto_restarts as u64 + ((self.manual_restarts as u64) << 32))
            .wrapping_mul(0x9E37_79B9_7F4A_7C15);
        self.rng = ChaCha8Rng::seed_from_u64(self.cfg.random_seed ^ salt);
        self.cycle = 0;
        self.stall = 0;
        self.phase = Phase::Anneal;
        self.recount();
        self.last_improvement = self.elapsed();
    }

    /// Operator restart with new directives and request edits. On error the
    /// state is unchanged. Returns whether anything changed.
    pub fn manual_restart(
        &mut self,
        directives: &CellDirectives,
        request_edits: &[RequestEdit],
    ) -> Result<bool, SearchError> {
        if *directives == self.directives && request_edits.is_empty() {
            return Ok(false);
        }
        let inst = if request_edits.is_empty() {
            self.inst.clone()
        } else {
            Arc::new(self.inst.with_request_edits(request_edits)?)
        };
        let resolved = directives.resolve(&inst)?;
        let base = self.best.as_ref().map(|b| b.roster.clone()).unwrap_or_else(|| self.ev.roster().clone());
        let mut roster = base.clone();
        let cells = self.fixed.len();
        self.fixed = vec![false; cells];
        self.cleared = vec![false; cells];
        self.reference = vec![None; cells];
        for a in &resolved.fixed {
            let i = self.idx(a.nurse, a.day);
            self.fixed[i] = true;
            roster.set(a.nurse, a.day, a.shift);
        }
        for a in &resolved.prioritized {
            let i = self.idx(a.nurse, a.day);
            self.reference[i] = Some(a.shift);
        }
        let mut cleared_cells = Vec::new();
        for &(n, d) in &resolved.cleared {
            let i = self.idx(n, d);
            self.cleared[i] = true;
            let v = inst
                .rest_completion(n, d)
                .unwrap_or_else(|| inst.cell_domain(n, d).expect("decision day")[0]);
            roster.set(n, d, v);
            cleared_cells.push((n, d));
        }
        for i in 0..cells {
            self.guide[i] = if self.fixed[i] || self.cleared[i] {
                None
            } else {
                self.reference[i].or(Some(base.cells()[i]))
            };
        }
        self.ref_count = resolved.prioritized.len();
        self.inst = inst.clone();
        self.ev = IncrementalEvaluator::new(inst, roster, self.ev.soften_hard());
        self.directives = directives.clone();
        self.refresh_free();
        cleared_cells.retain(|&(n, d)| self.is_free[self.idx(n, d)]);
        cleared_cells.shuffle(&mut self.rng);
        self.phase = Phase::Descent { order: cleared_cells, pos: 0, improved: false, passes: 0 };
        self.manual_restarts += 1;
        self.new_epoch();
        Ok(true)
    }

    pub fn set_soften_hard(&mut self, soften: bool) -> bool {
        if soften == self.ev.soften_hard() {
            return false;
        }
        self.ev.set_soften_hard(soften);
        self.cfg.soften_hard = soften;
        self.new_epoch();
        true
    }

    fn new_epoch(&mut self) {
        self.epoch += 1;
        self.best = None;
        self.cycle = 0;
        self.stall = 0;
        self.recount();
        self.last_improvement = self.elapsed();
    }

    /// Handles one control message. Returns false when the search must
    /// stop.
    fn handle(&mut self, msg: Control, rx: &Receiver<Control>, sink: &mut dyn FnMut(&Event)) -> bool {
        match msg {
            Control::Stop => {
                self.stopped = true;
                false
            }
            Control::Resume => true,
            Control::Pause => self.paused(rx, sink),
            Control::Reconfigure { directives, request_edits } => {
                self.reconfigure(&directives, &request_edits, sink);
                true
            }
            Control::SetSoften(flag) => {
                if self.set_soften_hard(flag) {
                    self.publish(sink, false);
                }
                true
            }
        }
    }

    fn reconfigure(&mut self, directives: &CellDirectives, edits: &[RequestEdit], sink: &mut dyn FnMut(&Event)) {
        match self.manual_restart(directives, edits) {
            Ok(true) => {
                sink(&Event::Restart {
                    kind: RestartKind::Manual,
                    at_seconds: self.elapsed(),
                    count: self.manual_restarts,
                });
                self.publish(sink, false);
            }
            Ok(false) => {}
            Err(e) => sink(&Event::Rejected { message: e.to_string() }),
        }
    }

    fn paused(&mut self, rx: &Receiver<Control>, sink: &mut dyn FnMut(&Event)) -> bool {
        self.publish(sink, false);
        self.clock.pause();
        sink(&Event::Paused { at_seconds: self.elapsed() });
        loop {
            match rx.recv() {
                Ok(Control::Resume) => break,
                Ok(Control::Pause) => {}
                Ok(msg) => {
                    if !self.handle(msg, rx, sink) {
                        return false;
                    }
                }
                Err(_) => {
                    self.stopped = true;
                    return false;
                }
            }
        }
        self.clock.resume();
        sink(&Event::Resumed { at_seconds: self.elapsed() });
        true
    }

    /// Runs until the time limit, a stop message or, unless configured to
    /// idle, a zero key.
    pub fn run(&mut self, control: Option<&Receiver<Control>>, sink: &mut dyn FnMut(&Event)) -> SearchOutcome {
        if self.inst.nurse_count() == 0 || self.inst.end_day() <= 0 {
            self.publish(sink, true);
            return self.outcome();
        }
        self.publish(sink, false);
        let limit = self.cfg.time_limit_seconds;
        'outer: loop {
            if let Some(rx) = control {
                while let Ok(msg) = rx.try_recv() {
                    if !self.handle(msg, rx, sink) {
                        break 'outer;
                    }
                }
            }
            let now = self.elapsed();
            if now >= limit {
                break;
            }
            if self.is_done() {
                self.publish(sink, false);
                let idle = self.cfg.idle_when_optimal && matches!(self.cfg.time_model, TimeModel::Wall);
                let Some(rx) = control.filter(|_| idle) else { break };
                match rx.recv_timeout(Duration::from_secs_f64(limit - now)) {
                    Ok(msg) => {
                        if !self.handle(msg, rx, sink) {
                            break;
                        }
                    }
                    Err(RecvTimeoutError::Timeout) => break,
                    Err(RecvTimeoutError::Disconnected) => {
                        std::thread::sleep(Duration::from_secs_f64(limit - now));
                        break;
                    }
                }
                continue;
            }
            if let Some(t) = self.cfg.strategy.restart_interval() {
                if matches!(self.phase, Phase::Anneal) && now - self.last_improvement >= t {
                    self.automatic_restart();
                    sink(&Event::Restart {
                        kind: RestartKind::Automatic,
                        at_seconds: now,
                        count: self.auto_restarts,
                    });
                    continue;
                }
            }
            self.step(sink);
        }
        self.publish(sink, false);
        self.outcome()
    }

    fn outcome(&self) -> SearchOutcome {
        let status = if self.best.is_none() && !self.ev.soften_hard() {
            Status::Infeasible { best_hard_weight: self.min_hard }
        } else if self.stopped {
            Status::Stopped
        } else if self.cur_key.iter().all(|&x| x == 0) {
            Status::Optimal
        } else if self.free.is_empty() {
            Status::Exhausted
        } else {
            Status::TimeLimit
        };
        SearchOutcome {
            status,
            best: self.best.clone(),
            incumbents: self.published,
            iterations: self.iterations,
            automatic_restarts: self.auto_restarts,
            manual_restarts: self.manual_restarts,
            elapsed_seconds: self.elapsed(),
        }
    }
}
