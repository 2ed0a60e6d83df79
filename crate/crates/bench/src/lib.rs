//! Fixtures shared by the criterion benches in `benches/`.

use nlbench_core::filters::{Filter, FilterConfig};
use nlbench_core::scenarios::{simulate_trajectory, ScenarioConfig, ScenarioKind, StateSpaceModel, Trajectory};

/// A scenario model together with one simulated trajectory to filter.
pub struct Fixture {
    pub model: Box<dyn StateSpaceModel>,
    pub trajectory: Trajectory,
}

impl Fixture {
    pub fn new(kind: ScenarioKind, horizon: usize) -> Self {
        let model = ScenarioConfig::default_for(kind)
            .build()
            .expect("default scenario builds");
        let trajectory = simulate_trajectory(model.as_ref(), horizon, 7).expect("simulation succeeds");
        Self { model, trajectory }
    }
}

/// Steps a filter through a trajectory, restarting from the prior at the end
/// so a bench can run for any number of iterations.
pub struct Cycler<'m> {
    config: FilterConfig,
    fixture: &'m Fixture,
    filter: Filter<'m>,
    t: usize,
}

impl<'m> Cycler<'m> {
    pub fn new(config: FilterConfig, fixture: &'m Fixture) -> Self {
        let filter = Filter::new(config, fixture.model.as_ref(), 0).expect("valid filter config");
        Self {
            config,
            fixture,
            filter,
            t: 0,
        }
    }

    /// One predict/update cycle; returns the first estimate component.
    pub fn step(&mut self) -> f64 {
        let traj = &self.fixture.trajectory;
        if self.t == traj.horizon() {
            self.filter = Filter::new(self.config, self.fixture.model.as_ref(), 0).expect("valid filter config");
            self.t = 0;
        }
        let (u, y) = (&traj.controls[self.t], &traj.observations[self.t]);
        self.t += 1;
        // a diverged step still costs the same work, so errors are ignored
        self.filter.step(u, y).map(|e| e[0]).unwrap_or(f64::NAN)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nlbench_core::filters::Method;

    #[test]
    fn cycler_wraps_past_the_horizon() {
        let fixture = Fixture::new(ScenarioKind::Pendulum, 5);
        let mut cycler = Cycler::new(Method::Ekf.default_filter().unwrap(), &fixture);
        let first: Vec<f64> = (0..5).map(|_| cycler.step()).collect();
        let second: Vec<f64> = (0..5).map(|_| cycler.step()).collect();
        assert_eq!(first, second);
    }
}
