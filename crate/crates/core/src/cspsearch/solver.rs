use std::collections::VecDeque;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Csp, CspError, CspResult, CspVerdict, SolveOptions, SolveStats};
use crate::model::{compare, PreferenceVerdict};

/// Complete backtracking search with arc consistency on the preference
/// constraints and unit propagation on the relevance disjunctions.
///
/// Variables are picked by smallest domain, then by constraint degree
/// (unseeded runs only), then by rank; values ascend unless a seed
/// shuffles them.
pub fn solve(csp: &Csp, options: &SolveOptions) -> Result<CspResult, CspError> {
    let mut search = Search::new(csp, options);
    let outcome = search.run(options);
    search.stats.wall_time_ms = search.started.elapsed().as_millis() as u64;
    match outcome {
        Err(limit) => Err(CspError::Inconclusive {
            limit: limit.into(),
            stats: search.stats,
        }),
        Ok(true) => {
            let grid = csp.instance().grid();
            let model = csp
                .class_of()
                .iter()
                .map(|c| grid[search.domains[*c].trailing_zeros() as usize])
                .collect();
            Ok(CspResult {
                verdict: CspVerdict::Sat,
                model: Some(model),
                stats: search.stats,
                certificate: None,
            })
        }
        Ok(false) => Ok(CspResult {
            verdict: CspVerdict::Unsat,
            model: None,
            stats: search.stats,
            certificate: Some(csp.certificate_id()),
        }),
    }
}

enum VrState {
    Satisfied,
    Violated,
    Prune(usize, u32),
    Open,
}

struct Frame {
    var: usize,
    values: Vec<u32>,
    next: usize,
    mark: usize,
}

struct Search<'a> {
    csp: &'a Csp,
    domains: Vec<u64>,
    trail: Vec<(usize, u64)>,
    /// `forward[t][a]`: values of the deviation cell allowed when the
    /// truthful cell is `a` and the peak is grid point `t`.
    forward: Vec<Vec<u64>>,
    /// `backward[t][b]`: truthful values allowed against deviation value `b`.
    backward: Vec<Vec<u64>>,
    adjacency: Vec<Vec<usize>>,
    degree: Vec<usize>,
    rank: Vec<usize>,
    value_order: Option<Vec<Vec<u32>>>,
    queue: VecDeque<usize>,
    queued: Vec<bool>,
    stats: SolveStats,
    started: Instant,
}

impl<'a> Search<'a> {
    fn new(csp: &'a Csp, options: &SolveOptions) -> Self {
        let grid = csp.instance().grid();
        let model = csp.instance().preference_model();
        let g = grid.len();
        let mut forward = vec![vec![0u64; g]; g];
        let mut backward = vec![vec![0u64; g]; g];
        for t in 0..g {
            for a in 0..g {
                for b in 0..g {
                    let verdict = compare(grid[t], grid[a], grid[b], model);
                    if matches!(verdict, PreferenceVerdict::Better | PreferenceVerdict::Indifferent) {
                        forward[t][a] |= 1 << b;
                        backward[t][b] |= 1 << a;
                    }
                }
            }
        }

        let n = csp.search_variable_count();
        let mut adjacency = vec![Vec::new(); n];
        for (i, c) in csp.sp_constraints().iter().enumerate() {
            adjacency[c.x].push(i);
            adjacency[c.y].push(i);
        }
        let mut degree: Vec<usize> = adjacency.iter().map(Vec::len).collect();
        for vr in csp.vr_constraints() {
            for group in &vr.groups {
                for v in group {
                    degree[*v] += 1;
                }
            }
        }

        let mut rank: Vec<usize> = (0..n).collect();
        let mut value_order = None;
        if let Some(seed) = options.seed {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rank.shuffle(&mut rng);
            value_order = Some(
                (0..n)
                    .map(|_| {
                        let mut order: Vec<u32> = (0..g as u32).collect();
                        order.shuffle(&mut rng);
                        order
                    })
                    .collect(),
            );
        }

        Search {
            csp,
            domains: csp.initial_domains().to_vec(),
            trail: Vec::new(),
            forward,
            backward,
            adjacency,
            degree,
            rank,
            value_order,
            queue: VecDeque::new(),
            queued: vec![false; n],
            stats: SolveStats::default(),
            started: Instant::now(),
        }
    }

    fn set(&mut self, var: usize, mask: u64) {
        let old = self.domains[var];
        if old != mask {
            self.trail.push((var, old));
            self.stats.prunings += u64::from((old & !mask).count_ones());
            self.domains[var] = mask;
            if !self.queued[var] {
                self.queued[var] = true;
                self.queue.push_back(var);
            }
        }
    }

    fn undo(&mut self, mark: usize) {
        while self.trail.len() > mark {
            let (var, old) = self.trail.pop().expect("above mark");
            self.domains[var] = old;
        }
    }

    fn clear_queue(&mut self) {
        for var in self.queue.drain(..) {
            self.queued[var] = false;
        }
    }

    fn support(table: &[u64], domain: u64) -> u64 {
        let mut bits = domain;
        let mut out = 0;
        while bits != 0 {
            out |= table[bits.trailing_zeros() as usize];
            bits &= bits - 1;
        }
        out
    }

    fn propagate(&mut self) -> bool {
        loop {
            while let Some(var) = self.queue.pop_front() {
                self.queued[var] = false;
                for k in 0..self.adjacency[var].len() {
                    let c = self.csp.sp_constraints()[self.adjacency[var][k]];
                    self.stats.propagations += 1;
                    let t = c.peak as usize;
                    let y = self.domains[c.y] & Self::support(&self.forward[t], self.domains[c.x]);
                    if y == 0 {
                        self.clear_queue();
                        return false;
                    }
                    self.set(c.y, y);
                    let x = self.domains[c.x] & Self::support(&self.backward[t], self.domains[c.y]);
                    if x == 0 {
                        self.clear_queue();
                        return false;
                    }
                    self.set(c.x, x);
                }
            }
            let mut changed = false;
            for i in 0..self.csp.vr_constraints().len() {
                self.stats.propagations += 1;
                match self.vr_state(i) {
                    VrState::Violated => {
                        self.clear_queue();
                        return false;
                    }
                    VrState::Prune(var, value) => {
                        let mask = self.domains[var] & !(1u64 << value);
                        if mask == 0 {
                            self.clear_queue();
                            return false;
                        }
                        self.set(var, mask);
                        changed = true;
                    }
                    VrState::Satisfied | VrState::Open => {}
                }
            }
            if !changed {
                return true;
            }
        }
    }

    fn vr_state(&self, index: usize) -> VrState {
        let mut open_groups = 0;
        let mut last_open = 0;
        for (g, group) in self.csp.vr_constraints()[index].groups.iter().enumerate() {
            let mut fixed = None;
            let mut unfixed = 0;
            for var in group {
                let d = self.domains[*var];
                if d.count_ones() == 1 {
                    match fixed {
                        None => fixed = Some(d),
                        Some(f) if f != d => return VrState::Satisfied,
                        _ => {}
                    }
                } else {
                    unfixed += 1;
                }
            }
            if let Some(f) = fixed {
                if group.iter().any(|v| self.domains[*v] & f == 0) {
                    return VrState::Satisfied;
                }
            }
            if unfixed > 0 {
                open_groups += 1;
                last_open = g;
            }
        }
        match open_groups {
            0 => VrState::Violated,
            1 => {
                // The last undecided group must vary: if only one cell in it is
                // free, it may not take the value the others are fixed to.
                let group = &self.csp.vr_constraints()[index].groups[last_open];
                let free: Vec<usize> = group
                    .iter()
                    .copied()
                    .filter(|v| self.domains[*v].count_ones() > 1)
                    .collect();
                let fixed = group.iter().find(|v| self.domains[**v].count_ones() == 1);
                match (free.as_slice(), fixed) {
                    ([var], Some(f)) => VrState::Prune(*var, self.domains[*f].trailing_zeros()),
                    _ => VrState::Open,
                }
            }
            _ => VrState::Open,
        }
    }

    fn select(&self) -> Option<usize> {
        let seeded = self.value_order.is_some();
        (0..self.domains.len())
            .filter(|v| self.domains[*v].count_ones() > 1)
            .min_by_key(|v| {
                let degree = if seeded { 0 } else { self.degree[*v] };
                (self.domains[*v].count_ones(), usize::MAX - degree, self.rank[*v])
            })
    }

    fn values(&self, var: usize) -> Vec<u32> {
        let domain = self.domains[var];
        match &self.value_order {
            Some(orders) => orders[var].iter().copied().filter(|b| domain >> b & 1 == 1).collect(),
            None => (0..64).filter(|b| domain >> b & 1 == 1).collect(),
        }
    }

    /// `Ok(true)` on a model, `Ok(false)` on exhaustion, `Err(limit)` when a
    /// limit stops the search.
    fn run(&mut self, options: &SolveOptions) -> Result<bool, &'static str> {
        if self.domains.contains(&0) {
            return Ok(false);
        }
        for var in 0..self.domains.len() {
            self.queued[var] = true;
            self.queue.push_back(var);
        }
        if !self.propagate() {
            return Ok(false);
        }
        let mut stack: Vec<Frame> = Vec::new();
        loop {
            let Some(var) = self.select() else {
                return Ok(true);
            };
            stack.push(Frame {
                var,
                values: self.values(var),
                next: 0,
                mark: self.trail.len(),
            });
            loop {
                let Some(frame) = stack.last_mut() else {
                    return Ok(false);
                };
                let (var, mark) = (frame.var, frame.mark);
                if frame.next == frame.values.len() {
                    stack.pop();
                    self.undo(mark);
                    continue;
                }
                let value = frame.values[frame.next];
                frame.next += 1;
                self.undo(mark);

                self.stats.nodes_explored += 1;
                if options
                    .node_limit
                    .is_some_and(|limit| self.stats.nodes_explored > limit)
                {
                    return Err("node");
                }
                if self.stats.nodes_explored.is_multiple_of(256)
                    && options.time_limit.is_some_and(|limit| self.started.elapsed() > limit)
                {
                    return Err("time");
                }
                self.set(var, 1u64 << value);
                if self.propagate() {
                    break;
                }
            }
        }
    }
}
