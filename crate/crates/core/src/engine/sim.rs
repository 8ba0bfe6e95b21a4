use std::collections::{HashMap, VecDeque};

use super::alu::{self, AluOp, Latencies};
use super::micro::*;
use super::EngineError;
use crate::translator::ScalarRef;

const NEVER: u64 = u64::MAX;

#[derive(Debug, Clone)]
pub struct AuState {
    pub data: Vec<f64>,
    ready: Vec<u64>,
    pub konst: Vec<f64>,
    pub out_reg: Option<f64>,
    busy_until: u64,
    ip: usize,
    fifo: VecDeque<f64>,
}

impl AuState {
    fn new(data_words: usize, const_words: usize) -> Self {
        AuState {
            data: vec![0.0; data_words],
            ready: vec![NEVER; data_words],
            konst: vec![0.0; const_words],
            out_reg: None,
            busy_until: 0,
            ip: 0,
            fifo: VecDeque::new(),
        }
    }

    /// True when data word `addr` holds a value visible at `cycle`.
    pub fn valid(&self, addr: usize, cycle: u64) -> bool {
        self.ready.get(addr).is_some_and(|&r| r <= cycle)
    }
}

#[derive(Debug, Clone, Copy)]
enum Event {
    Mem { unit: usize, addr: u32, v: f64 },
    Fifo { unit: usize, v: f64 },
    OutReg { unit: usize, v: f64 },
    Port { slot: u32, v: f64 },
}

/// One issued AU operation, for occupancy traces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Issue {
    pub cycle: u64,
    pub ac: usize,
    pub au: usize,
    pub op: AluOp,
}

/// Cycle-level state of one thread: its ACs, AUs, buses and tree-bus port.
#[derive(Debug, Clone)]
pub struct ThreadSim {
    pub aus: Vec<AuState>,
    pub port: Vec<f64>,
    pub cycle: u64,
    latencies: Latencies,
    fifo_depth: usize,
    enabled: [bool; 16],
    calendar: Vec<Vec<Event>>,
    ac_bus: HashMap<(usize, u64), (usize, u64)>,
    inter_bus: HashMap<(usize, u64), (usize, u64)>,
    persistent: Vec<(usize, u32)>,
    pub trace: Option<Vec<Issue>>,
}

fn op_index(op: AluOp) -> usize {
    AluOp::ALL.iter().position(|o| *o == op).expect("op listed")
}

impl ThreadSim {
    pub fn new(prog: &MicroProgram, latencies: &Latencies, fifo_depth: usize, enabled: &[AluOp]) -> Self {
        let units = prog.acs * AUS_PER_AC;
        let mut on = [false; 16];
        for op in enabled {
            on[op_index(*op)] = true;
        }
        let ports = prog.accumulators.iter().map(|a| a.slot as usize + 1).max().unwrap_or(0);
        ThreadSim {
            aus: (0..units).map(|_| AuState::new(prog.data_words as usize, prog.const_words as usize)).collect(),
            port: vec![0.0; ports],
            cycle: 0,
            latencies: latencies.clone(),
            fifo_depth,
            enabled: on,
            calendar: Vec::new(),
            ac_bus: HashMap::new(),
            inter_bus: HashMap::new(),
            persistent: prog.accumulators.iter().map(|a| (a.loc.unit(), a.loc.addr)).collect(),
            trace: None,
        }
    }

    pub fn load_consts(&mut self, prog: &MicroProgram, value: &dyn Fn(&ScalarRef) -> f64) {
        for p in &prog.const_preloads {
            self.aus[p.loc.unit()].konst[p.loc.addr as usize] = prog.width.round(value(&p.value));
        }
    }

    /// Accumulators and port latches back to `identity` (start of a batch).
    pub fn reset_accumulators(&mut self, prog: &MicroProgram, identity: f64) {
        for a in &prog.accumulators {
            self.aus[a.loc.unit()].data[a.loc.addr as usize] = identity;
        }
        self.port.fill(identity);
    }

    /// Clear per-run state and load the data preloads.
    pub fn start_run(&mut self, prog: &MicroProgram, value: &dyn Fn(&ScalarRef) -> f64) {
        self.cycle = 0;
        for slot in &mut self.calendar {
            slot.clear();
        }
        self.ac_bus.clear();
        self.inter_bus.clear();
        for st in &mut self.aus {
            st.ready.fill(NEVER);
            st.busy_until = 0;
            st.ip = 0;
            st.fifo.clear();
            st.out_reg = None;
        }
        for &(unit, addr) in &self.persistent {
            self.aus[unit].ready[addr as usize] = 0;
        }
        for p in &prog.data_preloads {
            let st = &mut self.aus[p.loc.unit()];
            st.data[p.loc.addr as usize] = prog.width.round(value(&p.value));
            st.ready[p.loc.addr as usize] = 0;
        }
    }

    /// Replay the whole program; returns the cycles spent.
    pub fn run(&mut self, prog: &MicroProgram, value: &dyn Fn(&ScalarRef) -> f64) -> Result<u64, EngineError> {
        self.start_run(prog, value);
        for _ in 0..prog.makespan {
            self.step_cycle(prog)?;
        }
        self.drain();
        Ok(prog.makespan as u64)
    }

    pub fn output(&self, loc: &Loc) -> f64 {
        self.aus[loc.unit()].data[loc.addr as usize]
    }

    fn schedule(&mut self, at: u64, ev: Event) {
        let at = at as usize;
        if self.calendar.len() <= at {
            self.calendar.resize_with(at + 1, Vec::new);
        }
        self.calendar[at].push(ev);
    }

    fn deliver(&mut self, cycle: u64) -> Result<(), EngineError> {
        let Some(events) = self.calendar.get_mut(cycle as usize) else {
            return Ok(());
        };
        let events = std::mem::take(events);
        for ev in &events {
            match *ev {
                Event::Mem { unit, addr, v } => {
                    let st = &mut self.aus[unit];
                    let a = addr as usize;
                    if a >= st.data.len() {
                        return Err(EngineError::Address { cycle, unit, addr });
                    }
                    st.data[a] = v;
                    st.ready[a] = cycle;
                }
                Event::Fifo { unit, v } => {
                    let st = &mut self.aus[unit];
                    if st.fifo.len() >= self.fifo_depth {
                        return Err(EngineError::FifoOverflow { cycle, unit });
                    }
                    st.fifo.push_back(v);
                }
                Event::OutReg { unit, v } => self.aus[unit].out_reg = Some(v),
                Event::Port { slot, v } => {
                    let s = slot as usize;
                    if s >= self.port.len() {
                        self.port.resize(s + 1, 0.0);
                    }
                    self.port[s] = v;
                }
            }
        }
        // Hand the emptied buffer back to avoid reallocating next run.
        let mut events = events;
        events.clear();
        self.calendar[cycle as usize] = events;
        Ok(())
    }

    /// Apply every pending event (results retiring at or after the last
    /// issue cycle).
    fn drain(&mut self) {
        let start = self.cycle as usize;
        for c in start..self.calendar.len() {
            // Faults cannot arise here for scheduler output; ignore them in
            // the tail so a run always completes.
            let _ = self.deliver(c as u64);
        }
    }

    fn read(&mut self, unit: usize, src: Src, cycle: u64) -> Result<f64, EngineError> {
        let (ac, au) = (unit / AUS_PER_AC, unit % AUS_PER_AC);
        match src {
            Src::Data(addr) => {
                let st = &self.aus[unit];
                if addr as usize >= st.data.len() {
                    return Err(EngineError::Address { cycle, unit, addr });
                }
                if !st.valid(addr as usize, cycle) {
                    return Err(EngineError::NotReady { cycle, ac, au, addr });
                }
                Ok(st.data[addr as usize])
            }
            Src::Const(addr) => self.aus[unit]
                .konst
                .get(addr as usize)
                .copied()
                .ok_or(EngineError::Address { cycle, unit, addr }),
            Src::Neighbor(side) => {
                let nb = neighbor(au, side).ok_or(EngineError::NoNeighbor { cycle, ac, au })?;
                self.aus[ac * AUS_PER_AC + nb].out_reg.ok_or(EngineError::NotReady { cycle, ac, au, addr: u32::MAX })
            }
            Src::Fifo => self.aus[unit].fifo.pop_front().ok_or(EngineError::FifoUnderflow { cycle, ac, au }),
        }
    }

    pub fn step_cycle(&mut self, prog: &MicroProgram) -> Result<(), EngineError> {
        let c = self.cycle;
        self.deliver(c)?;
        for ac in 0..prog.acs {
            let w = prog.streams[ac].get(c as usize).copied().unwrap_or(AcInstr::NOP);
            let Some(op) = w.op else { continue };
            if !self.enabled[op_index(op)] {
                return Err(EngineError::OpDisabled { cycle: c, op });
            }
            for au in 0..AUS_PER_AC {
                if w.mask & (1 << au) != 0 {
                    self.issue(prog, ac, au, op, c)?;
                }
            }
        }
        self.cycle += 1;
        Ok(())
    }

    fn issue(&mut self, prog: &MicroProgram, ac: usize, au: usize, op: AluOp, c: u64) -> Result<(), EngineError> {
        let unit = ac * AUS_PER_AC + au;
        if self.aus[unit].busy_until > c {
            return Err(EngineError::Busy { cycle: c, ac, au });
        }
        let ins = prog.au_code[unit]
            .get(self.aus[unit].ip)
            .ok_or(EngineError::CodeExhausted { cycle: c, ac, au })?;
        if ins.op != op {
            return Err(EngineError::OpMismatch { cycle: c, ac, au, cluster: op, unit: ins.op });
        }
        let a = self.read(unit, ins.a, c)?;
        let b = match ins.b {
            Some(s) => self.read(unit, s, c)?,
            None => 0.0,
        };
        let v = alu::eval(op, a, b, prog.width);
        let r = c + self.latencies.of(op) as u64;
        let st = &mut self.aus[unit];
        st.busy_until = r;
        st.ip += 1;
        if let Some(t) = self.trace.as_mut() {
            t.push(Issue { cycle: c, ac, au, op });
        }
        self.schedule(r, Event::OutReg { unit, v });
        for d in &ins.dsts {
            match *d {
                Dst::Data(addr) => self.schedule(r, Event::Mem { unit, addr, v }),
                Dst::Neighbor { side, addr } => {
                    let nb = neighbor(au, side).ok_or(EngineError::NoNeighbor { cycle: c, ac, au })?;
                    let at = r + self.latencies.neighbor as u64;
                    self.schedule(at, Event::Mem { unit: ac * AUS_PER_AC + nb, addr, v });
                }
                Dst::AcBus { au: to_au, to, delay } => {
                    let send = r + delay as u64;
                    match self.ac_bus.get(&(ac, send)) {
                        Some(&owner) if owner != (unit, r) => {
                            return Err(EngineError::BusConflict { cycle: send, bus: format!("ac{ac} bus") })
                        }
                        _ => {
                            self.ac_bus.insert((ac, send), (unit, r));
                        }
                    }
                    let target = ac * AUS_PER_AC + to_au as usize;
                    self.schedule(send + self.latencies.ac_bus as u64, landing(target, to, v));
                }
                Dst::InterAc { ac: to_ac, au: to_au, to, delay } => {
                    let send = r + delay as u64;
                    match self.inter_bus.get(&(ac, send)) {
                        Some(&owner) if owner != (unit, r) => {
                            return Err(EngineError::BusConflict { cycle: send, bus: format!("ac{ac} inter-AC line") })
                        }
                        _ => {
                            self.inter_bus.insert((ac, send), (unit, r));
                        }
                    }
                    let target = to_ac as usize * AUS_PER_AC + to_au as usize;
                    if target >= self.aus.len() {
                        return Err(EngineError::Address { cycle: c, unit: target, addr: 0 });
                    }
                    self.schedule(send + self.latencies.inter_ac_bus as u64, landing(target, to, v));
                }
                Dst::TreePort { slot } => self.schedule(r, Event::Port { slot, v }),
            }
        }
        Ok(())
    }
}

fn landing(unit: usize, to: Landing, v: f64) -> Event {
    match to {
        Landing::Mem(addr) => Event::Mem { unit, addr, v },
        Landing::Fifo => Event::Fifo { unit, v },
    }
}

fn neighbor(au: usize, side: Side) -> Option<usize> {
    match side {
        Side::Left => au.checked_sub(1),
        Side::Right => (au + 1 < AUS_PER_AC).then_some(au + 1),
    }
}
