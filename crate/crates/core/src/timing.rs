use std::time::Instant;

/// Timed phases, in reporting order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Phase {
    Sort,
    BuildTree,
    P2P,
    P2M,
    M2M,
    M2L,
    L2L,
    L2P,
    SimSendP2P,
    SimSendM2L,
}

impl Phase {
    pub const ALL: [Phase; 10] = [
        Phase::Sort,
        Phase::BuildTree,
        Phase::P2P,
        Phase::P2M,
        Phase::M2M,
        Phase::M2L,
        Phase::L2L,
        Phase::L2P,
        Phase::SimSendP2P,
        Phase::SimSendM2L,
    ];

    /// The six FMM kernels.
    pub const KERNELS: [Phase; 6] = [
        Phase::P2P,
        Phase::P2M,
        Phase::M2M,
        Phase::M2L,
        Phase::L2L,
        Phase::L2P,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Phase::Sort => "sort",
            Phase::BuildTree => "buildTree",
            Phase::P2P => "P2P",
            Phase::P2M => "P2M",
            Phase::M2M => "M2M",
            Phase::M2L => "M2L",
            Phase::L2L => "L2L",
            Phase::L2P => "L2P",
            Phase::SimSendP2P => "simSendP2P",
            Phase::SimSendM2L => "simSendM2L",
        }
    }

    #[inline]
    fn slot(&self) -> usize {
        *self as usize
    }
}

/// Wall seconds per phase plus run metadata. Phases never run read as zero.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TimingBreakdown {
    seconds: [f64; 10],
    pub n: usize,
    pub order: usize,
    pub workers: usize,
    pub max_level: u32,
}

impl TimingBreakdown {
    pub fn new(n: usize, order: usize, workers: usize, max_level: u32) -> Self {
        Self {
            seconds: [0.0; 10],
            n,
            order,
            workers,
            max_level,
        }
    }

    #[inline]
    pub fn get(&self, phase: Phase) -> f64 {
        self.seconds[phase.slot()]
    }

    pub fn add(&mut self, phase: Phase, seconds: f64) {
        self.seconds[phase.slot()] += seconds.max(0.0);
    }

    pub fn set(&mut self, phase: Phase, seconds: f64) {
        self.seconds[phase.slot()] = seconds.max(0.0);
    }

    /// Runs `f` and charges its wall time to `phase`.
    pub fn time<R>(&mut self, phase: Phase, f: impl FnOnce() -> R) -> R {
        let start = Instant::now();
        let out = f();
        self.add(phase, start.elapsed().as_secs_f64());
        out
    }

    /// Sum over every phase.
    pub fn total(&self) -> f64 {
        self.seconds.iter().sum()
    }

    /// Sum over the six kernels.
    pub fn kernel_total(&self) -> f64 {
        Phase::KERNELS.iter().map(|&p| self.get(p)).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Phase, f64)> + '_ {
        Phase::ALL.iter().map(move |&p| (p, self.get(p)))
    }

    /// Phase-wise maximum, used to combine concurrently running ranks.
    pub fn max_merge(&mut self, other: &TimingBreakdown) {
        for (a, b) in self.seconds.iter_mut().zip(other.seconds.iter()) {
            *a = a.max(*b);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_phases_are_zero() {
        let mut t = TimingBreakdown::new(10, 3, 1, 0);
        t.add(Phase::P2P, 0.5);
        t.add(Phase::M2L, 0.25);
        t.add(Phase::Sort, -1.0);
        assert_eq!(t.get(Phase::SimSendM2L), 0.0);
        assert_eq!(t.get(Phase::Sort), 0.0);
        assert_eq!(t.total(), 0.75);
        assert_eq!(t.kernel_total(), 0.75);
        assert_eq!(t.iter().count(), 10);
    }

    #[test]
    fn names_are_stable() {
        let names: Vec<_> = Phase::ALL.iter().map(|p| p.name()).collect();
        assert_eq!(
            names,
            [
                "sort",
                "buildTree",
                "P2P",
                "P2M",
                "M2M",
                "M2L",
                "L2L",
                "L2P",
                "simSendP2P",
                "simSendM2L"
            ]
        );
    }

    #[test]
    fn max_merge_takes_slowest() {
        let mut a = TimingBreakdown::default();
        let mut b = TimingBreakdown::default();
        a.set(Phase::P2P, 1.0);
        b.set(Phase::P2P, 2.0);
        b.set(Phase::L2P, 0.5);
        a.max_merge(&b);
        assert_eq!(a.get(Phase::P2P), 2.0);
        assert_eq!(a.get(Phase::L2P), 0.5);
    }
}
