//! Static list scheduling of one phase's sub-nodes onto a thread's ACs and
//! AUs, and emission of the matching micro-program.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::{DeclKind, Phase};
use crate::engine::micro::*;
use crate::engine::{AluOp, EngineConfig, Latencies, ThreadPrograms, TreeBusProgram, Width};
use crate::translator::{HDfg, NodeOp, ScalarRef};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SchedError {
    #[error("op {0} is not enabled on this engine")]
    Unschedulable(AluOp),
    #[error("ac{ac}.au{au} needs {words} data words, limit {limit}")]
    Memory { ac: usize, au: usize, words: u32, limit: u32 },
    #[error("{0}")]
    Invalid(String),
}

/// The thread architecture a schedule targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Target {
    pub acs: usize,
    pub latencies: Latencies,
    pub width: Width,
    pub enabled_ops: Vec<AluOp>,
    pub data_mem_words: u32,
}

impl Target {
    pub fn new(acs: usize) -> Self {
        let d = EngineConfig::default();
        Target { acs, latencies: d.latencies, width: d.width, enabled_ops: d.enabled_ops, data_mem_words: d.data_mem_words }
    }

    pub fn from_config(cfg: &EngineConfig) -> Self {
        Target {
            acs: cfg.acs_per_thread,
            latencies: cfg.latencies.clone(),
            width: cfg.width,
            enabled_ops: cfg.enabled_ops.clone(),
            data_mem_words: cfg.data_mem_words,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub sub_node: usize,
    pub op: AluOp,
    pub cycle: u32,
    pub latency: u32,
    pub ac: u16,
    pub au: u8,
    pub a: Src,
    pub b: Option<Src>,
    pub dsts: Vec<Dst>,
}

impl Placement {
    pub fn retire(&self) -> u32 {
        self.cycle + self.latency
    }

    fn unit(&self) -> usize {
        self.ac as usize * AUS_PER_AC + self.au as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Route {
    Neighbor,
    AcBus,
    InterAc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommEdge {
    pub value: ScalarRef,
    pub from: usize,
    pub to: usize,
    pub route: Route,
    /// Cycle the value is driven onto the link.
    pub send: u32,
    pub arrive: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub phase: Phase,
    pub acs: usize,
    pub width: Width,
    pub makespan: u32,
    /// In sub-node id order.
    pub placements: Vec<Placement>,
    pub comms: Vec<CommEdge>,
    pub data_preloads: Vec<Preload>,
    pub const_preloads: Vec<Preload>,
    pub accumulators: Vec<Accumulator>,
    pub outputs: Vec<(ScalarRef, Loc)>,
    pub data_words: u32,
    pub const_words: u32,
}

// Where an operand comes from, relative to the consuming AU.
#[derive(Debug, Clone, Copy)]
enum ArgPlan {
    Have(Src),
    Leaf { konst: bool },
    Neighbor { from: usize },
    AcBus { from: usize, send: u32 },
    InterAc { from: usize, send: u32 },
}

#[derive(Debug, Clone, Copy)]
struct Produced {
    unit: usize,
    retire: u32,
    placement: usize,
}

struct Board<'t> {
    t: &'t Target,
    busy: Vec<Vec<u64>>,
    acop: Vec<Vec<Option<AluOp>>>,
    ac_bus: HashMap<(usize, u32), (usize, u32)>,
    /// Keyed by (sending AC, cycle): each AC drives its own line.
    inter_bus: HashMap<(usize, u32), (usize, u32)>,
    next_data: Vec<u32>,
    next_const: Vec<u32>,
    produced: HashMap<ScalarRef, Produced>,
    copies: HashMap<(ScalarRef, usize), (Src, u32)>,
    /// ACs holding a copy of each produced value.
    holders: HashMap<ScalarRef, Vec<usize>>,
}

impl<'t> Board<'t> {
    fn new(t: &'t Target) -> Self {
        let units = t.acs * AUS_PER_AC;
        Board {
            t,
            busy: vec![Vec::new(); units],
            acop: vec![Vec::new(); t.acs],
            ac_bus: HashMap::new(),
            inter_bus: HashMap::new(),
            next_data: vec![0; units],
            next_const: vec![0; units],
            produced: HashMap::new(),
            copies: HashMap::new(),
            holders: HashMap::new(),
        }
    }

    fn is_busy(&self, unit: usize, c: u32) -> bool {
        let (w, b) = (c as usize / 64, c as usize % 64);
        self.busy[unit].get(w).is_some_and(|x| x & (1 << b) != 0)
    }

    fn set_busy(&mut self, unit: usize, c: u32) {
        let (w, b) = (c as usize / 64, c as usize % 64);
        let v = &mut self.busy[unit];
        if v.len() <= w {
            v.resize(w + 1, 0);
        }
        v[w] |= 1 << b;
    }

    fn earliest_issue(&self, unit: usize, ac: usize, op: AluOp, lat: u32, from: u32) -> u32 {
        let ops = &self.acop[ac];
        let mut c = from;
        'search: loop {
            if let Some(Some(o)) = ops.get(c as usize) {
                if *o != op {
                    c += 1;
                    continue;
                }
            }
            for k in 0..lat {
                if self.is_busy(unit, c + k) {
                    c += k + 1;
                    continue 'search;
                }
            }
            return c;
        }
    }

    fn ac_slot(&self, ac: usize, from: u32, owner: (usize, u32), taken: &[(usize, u32)]) -> u32 {
        let mut s = from;
        loop {
            let free = match self.ac_bus.get(&(ac, s)) {
                None => !taken.contains(&(ac, s)),
                Some(o) => *o == owner,
            };
            if free {
                return s;
            }
            s += 1;
        }
    }

    fn inter_slot(&self, from: u32, owner: (usize, u32), taken: &[(usize, u32)]) -> u32 {
        let ac = owner.0 / AUS_PER_AC;
        let mut s = from;
        loop {
            let free = match self.inter_bus.get(&(ac, s)) {
                None => !taken.contains(&(ac, s)),
                Some(o) => *o == owner,
            };
            if free {
                return s;
            }
            s += 1;
        }
    }

    /// Plan every operand for a consumer on `unit`; returns the plans, the
    /// cycle all operands are available and the communication cost.
    fn plan_args(&self, g: &HDfg, phase: Phase, unit: usize, args: &[ScalarRef]) -> (Vec<ArgPlan>, u32, u32) {
        let lat = &self.t.latencies;
        let ac = unit / AUS_PER_AC;
        let mut plans = Vec::with_capacity(args.len());
        let (mut ready, mut cost) = (0u32, 0u32);
        let mut ac_taken: Vec<(usize, u32)> = Vec::new();
        let mut inter_taken: Vec<(usize, u32)> = Vec::new();
        for (i, r) in args.iter().enumerate() {
            if let Some(j) = args[..i].iter().position(|x| x == r) {
                // Repeated operand: share the earlier plan.
                plans.push(plans[j]);
                continue;
            }
            if let Some(&(src, avail)) = self.copies.get(&(*r, unit)) {
                plans.push(ArgPlan::Have(src));
                ready = ready.max(avail);
                continue;
            }
            let Some(p) = self.produced.get(r) else {
                plans.push(ArgPlan::Leaf { konst: leaf_is_const(g, phase, r) });
                continue;
            };
            let owner = (p.unit, p.retire);
            let (pac, pau) = (p.unit / AUS_PER_AC, p.unit % AUS_PER_AC);
            let au = unit % AUS_PER_AC;
            if pac == ac && pau.abs_diff(au) == 1 {
                plans.push(ArgPlan::Neighbor { from: p.unit });
                ready = ready.max(p.retire + lat.neighbor);
                cost += 1;
            } else if pac == ac {
                let s = self.ac_slot(ac, p.retire, owner, &ac_taken);
                ac_taken.push((ac, s));
                plans.push(ArgPlan::AcBus { from: p.unit, send: s });
                ready = ready.max(s + lat.ac_bus);
                cost += 2;
            } else {
                let s = self.inter_slot(p.retire, owner, &inter_taken);
                inter_taken.push((pac, s));
                plans.push(ArgPlan::InterAc { from: p.unit, send: s });
                ready = ready.max(s + lat.inter_ac_bus);
                cost += 4;
            }
        }
        (plans, ready, cost)
    }
}

fn leaf_is_const(g: &HDfg, phase: Phase, r: &ScalarRef) -> bool {
    match r {
        ScalarRef::Const(_) => true,
        ScalarRef::Var { var, .. } => matches!(g.vars[*var].kind, DeclKind::Model | DeclKind::Meta),
        ScalarRef::Slot { .. } => {
            debug_assert!(g.is_phase_input(r, phase), "unproduced slot {r}");
            false
        }
    }
}

/// Longest latency path from each sub-node to a sink, over `subs`.
fn bottom_levels(subs: &[&crate::translator::SubNode], succs: &[Vec<usize>], lat: &Latencies) -> Vec<u32> {
    let mut b = vec![0u32; subs.len()];
    for i in (0..subs.len()).rev() {
        let tail = succs[i].iter().map(|&s| b[s]).max().unwrap_or(0);
        b[i] = lat.of(subs[i].op) + tail;
    }
    b
}

/// Schedule one phase of `g` onto a thread with `t.acs` ACs.
pub fn schedule(g: &HDfg, phase: Phase, t: &Target) -> Result<Schedule, SchedError> {
    if t.acs == 0 {
        return Err(SchedError::Invalid("a thread needs at least one AC".into()));
    }
    let width = if phase == Phase::Convergence { Width::F64 } else { t.width };
    // Sub-nodes of the phase, each with its node and position in the node.
    let mut subs = Vec::new();
    let mut pref = Vec::new();
    for n in g.nodes.iter().filter(|n| n.phase == phase) {
        let k = n.sub_nodes.len();
        for (i, s) in n.sub_nodes.iter().enumerate() {
            if !t.enabled_ops.contains(&s.op) {
                return Err(SchedError::Unschedulable(s.op));
            }
            subs.push(s);
            // Contiguous blocks of at least one AC's worth of elements, so
            // neighboring elements (and reduction pairs) share an AC.
            let e = match n.op {
                NodeOp::Group { .. } => k.max(1),
                _ => n.element_count().max(1),
            };
            let chunk = AUS_PER_AC.max(e.div_ceil(t.acs));
            pref.push((i / chunk).min(t.acs - 1));
        }
    }
    subs.sort_by_key(|s| s.id);
    let index: HashMap<ScalarRef, usize> =
        subs.iter().enumerate().filter(|(_, s)| !s.accumulate).map(|(i, s)| (s.out, i)).collect();
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); subs.len()];
    let mut succs: Vec<Vec<usize>> = vec![Vec::new(); subs.len()];
    for (i, s) in subs.iter().enumerate() {
        for a in &s.args {
            if let Some(&p) = index.get(a) {
                if !preds[i].contains(&p) {
                    preds[i].push(p);
                    succs[p].push(i);
                }
            }
        }
    }
    let prio = bottom_levels(&subs, &succs, &t.latencies);
    let mut missing: Vec<usize> = preds.iter().map(Vec::len).collect();
    let mut heap: BinaryHeap<(u32, Reverse<usize>)> =
        (0..subs.len()).filter(|&i| missing[i] == 0).map(|i| (prio[i], Reverse(i))).collect();

    let mut board = Board::new(t);
    let mut placements: Vec<Option<Placement>> = vec![None; subs.len()];
    let mut order: Vec<usize> = Vec::with_capacity(subs.len());
    let mut comms = Vec::new();
    let mut data_preloads = Vec::new();
    let mut const_preloads = Vec::new();
    let mut accumulators = Vec::new();

    while let Some((_, Reverse(i))) = heap.pop() {
        let s = subs[i];
        let lat = t.latencies.of(s.op);
        let vals: &[ScalarRef] = if s.accumulate { &s.args[..1] } else { &s.args };

        // Candidate search. ACs holding none of the produced operands all see
        // the same operand timing, so it is computed once for them.
        let mut local_acs: Vec<usize> = vals
            .iter()
            .filter_map(|r| board.holders.get(r))
            .flatten()
            .copied()
            .collect();
        local_acs.sort_unstable();
        local_acs.dedup();
        let foreign = (0..t.acs).find(|ac| !local_acs.contains(ac));
        let foreign_plan = foreign.map(|ac| board.plan_args(g, phase, ac * AUS_PER_AC, vals));
        let mut best: Option<((u32, u32, bool, usize, usize), usize)> = None;
        for ac in 0..t.acs {
            let is_local = local_acs.binary_search(&ac).is_ok();
            if !is_local {
                let (_, ready, _) = foreign_plan.as_ref().expect("foreign AC exists");
                if best.is_some_and(|(k, _)| *ready > k.0) {
                    continue;
                }
            }
            for au in 0..AUS_PER_AC {
                let unit = ac * AUS_PER_AC + au;
                let (ready, cost) = if is_local {
                    let (_, r, c) = board.plan_args(g, phase, unit, vals);
                    (r, c)
                } else {
                    let (_, r, c) = foreign_plan.as_ref().expect("foreign AC exists");
                    (*r, *c)
                };
                if best.is_some_and(|(k, _)| ready > k.0) {
                    continue;
                }
                let c = board.earliest_issue(unit, ac, s.op, lat, ready);
                let key = (c, cost, ac != pref[i], ac, au);
                if best.is_none_or(|(k, _)| key < k) {
                    best = Some((key, unit));
                }
            }
        }
        let ((cycle, ..), unit) = best.expect("at least one AU");
        let (ac, au) = (unit / AUS_PER_AC, unit % AUS_PER_AC);
        let (plans, ready, _) = board.plan_args(g, phase, unit, vals);
        debug_assert!(ready <= cycle);

        // Commit operands.
        let mut srcs = Vec::with_capacity(plans.len());
        for (r, plan) in vals.iter().zip(plans) {
            if let Some(&(src, _)) = board.copies.get(&(*r, unit)) {
                srcs.push(src);
                continue;
            }
            let (src, avail) = match plan {
                ArgPlan::Have(src) => (src, 0),
                ArgPlan::Leaf { konst } => {
                    let loc = |addr| Loc { ac: ac as u16, au: au as u8, addr };
                    if konst {
                        let addr = board.next_const[unit];
                        board.next_const[unit] += 1;
                        const_preloads.push(Preload { loc: loc(addr), value: *r });
                        (Src::Const(addr), 0)
                    } else {
                        let addr = board.next_data[unit];
                        board.next_data[unit] += 1;
                        data_preloads.push(Preload { loc: loc(addr), value: *r });
                        (Src::Data(addr), 0)
                    }
                }
                ArgPlan::Neighbor { from } | ArgPlan::AcBus { from, .. } | ArgPlan::InterAc { from, .. } => {
                    let p = board.produced[r];
                    let addr = board.next_data[unit];
                    board.next_data[unit] += 1;
                    let (route, send, arrive, dst) = match plan {
                        ArgPlan::Neighbor { .. } => {
                            let side = if au > from % AUS_PER_AC { Side::Right } else { Side::Left };
                            (Route::Neighbor, p.retire, p.retire + t.latencies.neighbor, Dst::Neighbor { side, addr })
                        }
                        ArgPlan::AcBus { send, .. } => {
                            board.ac_bus.insert((ac, send), (p.unit, p.retire));
                            let dst = Dst::AcBus { au: au as u8, to: Landing::Mem(addr), delay: send - p.retire };
                            (Route::AcBus, send, send + t.latencies.ac_bus, dst)
                        }
                        ArgPlan::InterAc { send, .. } => {
                            board.inter_bus.insert((p.unit / AUS_PER_AC, send), (p.unit, p.retire));
                            let dst = Dst::InterAc {
                                ac: ac as u16,
                                au: au as u8,
                                to: Landing::Mem(addr),
                                delay: send - p.retire,
                            };
                            (Route::InterAc, send, send + t.latencies.inter_ac_bus, dst)
                        }
                        _ => unreachable!(),
                    };
                    placements[p.placement].as_mut().expect("producer placed").dsts.push(dst);
                    comms.push(CommEdge { value: *r, from, to: unit, route, send, arrive });
                    board.holders.entry(*r).or_default().push(ac);
                    (Src::Data(addr), arrive)
                }
            };
            board.copies.insert((*r, unit), (src, avail));
            srcs.push(src);
        }

        // Issue.
        for k in 0..lat {
            board.set_busy(unit, cycle + k);
        }
        let ops = &mut board.acop[ac];
        if ops.len() <= cycle as usize {
            ops.resize(cycle as usize + 1, None);
        }
        ops[cycle as usize] = Some(s.op);
        let out = board.next_data[unit];
        board.next_data[unit] += 1;
        let loc = Loc { ac: ac as u16, au: au as u8, addr: out };
        let (a, b, dsts) = if s.accumulate {
            let ScalarRef::Slot { slot, .. } = s.out else {
                return Err(SchedError::Invalid("accumulator without a slot".into()));
            };
            accumulators.push(Accumulator { loc, slot: slot as u32 });
            (Src::Data(out), Some(srcs[0]), vec![Dst::Data(out), Dst::TreePort { slot: slot as u32 }])
        } else {
            (srcs[0], srcs.get(1).copied(), vec![Dst::Data(out)])
        };
        let retire = cycle + lat;
        if !s.accumulate {
            board.produced.insert(s.out, Produced { unit, retire, placement: i });
            board.copies.insert((s.out, unit), (Src::Data(out), retire));
            board.holders.entry(s.out).or_default().push(ac);
        }
        placements[i] = Some(Placement {
            sub_node: s.id,
            op: s.op,
            cycle,
            latency: lat,
            ac: ac as u16,
            au: au as u8,
            a,
            b,
            dsts,
        });
        order.push(i);

        for &sx in &succs[i] {
            missing[sx] -= 1;
            if missing[sx] == 0 {
                heap.push((prio[sx], Reverse(sx)));
            }
        }
    }

    let placements: Vec<Placement> = placements.into_iter().map(|p| p.expect("all placed")).collect();
    let makespan = placements.iter().map(Placement::retire).max().unwrap_or(0);
    let data_words = board.next_data.iter().copied().max().unwrap_or(0);
    if let Some(u) = board.next_data.iter().position(|&w| w > t.data_mem_words) {
        return Err(SchedError::Memory {
            ac: u / AUS_PER_AC,
            au: u % AUS_PER_AC,
            words: board.next_data[u],
            limit: t.data_mem_words,
        });
    }
    let mut outputs = Vec::new();
    for r in g.phase_outputs(phase) {
        let p = board
            .produced
            .get(&r)
            .ok_or_else(|| SchedError::Invalid(format!("phase output {r} has no producer")))?;
        let (src, _) = board.copies[&(r, p.unit)];
        let Src::Data(addr) = src else { unreachable!("results live in data memory") };
        outputs.push((r, Loc { ac: (p.unit / AUS_PER_AC) as u16, au: (p.unit % AUS_PER_AC) as u8, addr }));
    }
    Ok(Schedule {
        phase,
        acs: t.acs,
        width,
        makespan,
        placements,
        comms,
        data_preloads,
        const_preloads,
        accumulators,
        outputs,
        data_words,
        const_words: board.next_const.iter().copied().max().unwrap_or(0),
    })
}

impl Schedule {
    pub fn sub_node_cycles(&self) -> u64 {
        self.placements.iter().map(|p| p.latency as u64).sum()
    }

    /// ACs that issue at least one op.
    pub fn acs_used(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.placements.iter().map(|p| p.ac as usize).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Check structural and dependency soundness against the graph.
    pub fn validate(&self, g: &HDfg, lat: &Latencies) -> Result<(), String> {
        let expected: Vec<usize> = {
            let mut v: Vec<usize> = g.phase_sub_nodes(self.phase).map(|s| s.id).collect();
            v.sort_unstable();
            v
        };
        let mut got: Vec<usize> = self.placements.iter().map(|p| p.sub_node).collect();
        got.sort_unstable();
        if got != expected {
            return Err("placements do not cover the phase's sub-nodes exactly once".into());
        }
        let mut busy: HashMap<(u32, usize), usize> = HashMap::new();
        let mut acop: HashMap<(u32, u16), AluOp> = HashMap::new();
        for p in &self.placements {
            if p.latency != lat.of(p.op) {
                return Err(format!("sub-node {} latency mismatch", p.sub_node));
            }
            for k in 0..p.latency {
                if let Some(o) = busy.insert((p.cycle + k, p.unit()), p.sub_node) {
                    return Err(format!("ac{}.au{} double-booked at cycle {} ({o}, {})", p.ac, p.au, p.cycle + k, p.sub_node));
                }
            }
            if let Some(o) = acop.insert((p.cycle, p.ac), p.op) {
                if o != p.op {
                    return Err(format!("ac{} issues {o} and {} at cycle {}", p.ac, p.op, p.cycle));
                }
            }
        }
        let subs: HashMap<usize, &crate::translator::SubNode> = g.phase_sub_nodes(self.phase).map(|s| (s.id, s)).collect();
        let by_out: HashMap<ScalarRef, &Placement> = self
            .placements
            .iter()
            .filter(|p| !subs[&p.sub_node].accumulate)
            .map(|p| (subs[&p.sub_node].out, p))
            .collect();
        for p in &self.placements {
            let s = subs[&p.sub_node];
            let vals = if s.accumulate { &s.args[..1] } else { &s.args[..] };
            for r in vals {
                let Some(prod) = by_out.get(r) else { continue };
                let arrive = if prod.unit() == p.unit() {
                    prod.retire()
                } else {
                    self.comms
                        .iter()
                        .filter(|e| e.value == *r && e.to == p.unit())
                        .map(|e| e.arrive)
                        .min()
                        .ok_or_else(|| format!("sub-node {} reads {r} with no route", p.sub_node))?
                };
                if arrive > p.cycle {
                    return Err(format!("sub-node {} issues at {} before {r} arrives at {arrive}", p.sub_node, p.cycle));
                }
            }
        }
        let mut ac_bus: HashMap<(usize, u32), (usize, u32)> = HashMap::new();
        let mut inter: HashMap<(usize, u32), (usize, u32)> = HashMap::new();
        for e in &self.comms {
            let owner = (e.from, by_out[&e.value].retire());
            let clash = match e.route {
                Route::Neighbor => None,
                Route::AcBus => ac_bus.insert((e.from / AUS_PER_AC, e.send), owner).filter(|o| *o != owner),
                Route::InterAc => inter.insert((e.from / AUS_PER_AC, e.send), owner).filter(|o| *o != owner),
            };
            if clash.is_some() {
                return Err(format!("bus conflict at cycle {}", e.send));
            }
        }
        if self.placements.iter().any(|p| p.retire() > self.makespan) {
            return Err("makespan shorter than a placement".into());
        }
        Ok(())
    }

    /// `cycle,ac,au,sub_node,op` rows, one per issue, by cycle.
    pub fn occupancy_csv(&self) -> String {
        let mut rows: Vec<&Placement> = self.placements.iter().collect();
        rows.sort_by_key(|p| (p.cycle, p.ac, p.au));
        let mut s = String::from("cycle,ac,au,sub_node,op\n");
        for p in rows {
            let _ = writeln!(s, "{},{},{},{},{}", p.cycle, p.ac, p.au, p.sub_node, p.op.name());
        }
        s
    }

    /// AC streams and AU instruction memories that replay this schedule.
    pub fn emit_micro(&self) -> MicroProgram {
        let mut m = MicroProgram::empty(self.acs, self.width);
        m.makespan = self.makespan;
        for st in &mut m.streams {
            *st = vec![AcInstr::NOP; self.makespan as usize];
        }
        let mut by_cycle: Vec<&Placement> = self.placements.iter().collect();
        by_cycle.sort_by_key(|p| (p.cycle, p.ac, p.au));
        for p in by_cycle {
            let w = &mut m.streams[p.ac as usize][p.cycle as usize];
            w.op = Some(p.op);
            w.mask |= 1 << p.au;
            m.au_code[p.unit()].push(AuInstr { op: p.op, a: p.a, b: p.b, dsts: p.dsts.clone() });
        }
        m.data_preloads = self.data_preloads.clone();
        m.const_preloads = self.const_preloads.clone();
        m.accumulators = self.accumulators.clone();
        m.outputs = self.outputs.clone();
        m.data_words = self.data_words;
        m.const_words = self.const_words;
        m
    }
}

pub fn tree_program(g: &HDfg, threads: usize) -> TreeBusProgram {
    TreeBusProgram::new(g.merge.op, threads, g.nodes[g.merge_node].element_count())
}

/// All three phase schedules for one thread architecture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThreadSchedules {
    pub per_tuple: Schedule,
    pub post_merge: Schedule,
    pub convergence: Schedule,
}

impl ThreadSchedules {
    pub fn build(g: &HDfg, t: &Target) -> Result<Self, SchedError> {
        Ok(ThreadSchedules {
            per_tuple: schedule(g, Phase::PerTuple, t)?,
            post_merge: schedule(g, Phase::PostMerge, t)?,
            convergence: schedule(g, Phase::Convergence, t)?,
        })
    }

    pub fn programs(&self, g: &HDfg, threads: usize) -> ThreadPrograms {
        ThreadPrograms {
            per_tuple: self.per_tuple.emit_micro(),
            post_merge: self.post_merge.emit_micro(),
            convergence: self.convergence.emit_micro(),
            tree: tree_program(g, threads),
        }
    }
}
