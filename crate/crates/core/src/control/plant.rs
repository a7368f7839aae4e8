use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::{Command, ControlTrace};
use super::train::ControlModel;
use crate::error::{Error, Result};
use crate::heat_source::{BeamState, MIN_ABSORPTIVITY};
use crate::hopgd::Surrogate;
use crate::material::MaterialModel;
use crate::solver::{extract_meltpool_dims, Simulation};

/// Fixed process quantities used to turn a normalized energy density into
/// absorbed power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProcessConstants {
    /// m/s.
    pub speed: f64,
    pub hatch: f64,
    pub layer: f64,
    pub density: f64,
    pub specific_heat: f64,
    pub t_liquidus: f64,
    pub t_0: f64,
    /// Machine power the absorbed power is a fraction of, W.
    pub nominal_power: f64,
}

impl Default for ProcessConstants {
    fn default() -> Self {
        Self::for_material(&MaterialModel::in625())
    }
}

impl ProcessConstants {
    pub fn for_material(m: &MaterialModel) -> Self {
        ProcessConstants {
            speed: 1.23,
            hatch: 1e-4,
            layer: 4e-5,
            density: m.solid_density,
            specific_heat: m.cp_liquid,
            t_liquidus: m.t_liquidus,
            t_0: m.t_ambient,
            nominal_power: 300.0,
        }
    }

    /// `ηP = NED·V·H·L·ρ·c_p·(T_l − T_0)`.
    pub fn absorbed_power(&self, ned: f64) -> f64 {
        ned * self.speed * self.hatch * self.layer * self.density * self.specific_heat * (self.t_liquidus - self.t_0)
    }

    pub fn ned(&self, absorbed_power: f64) -> f64 {
        absorbed_power / self.absorbed_power(1.0)
    }

    /// Beam at the nominal power carrying the command's absorbed power.
    pub fn beam(&self, cmd: &Command) -> Result<BeamState> {
        let b = BeamState {
            power: self.nominal_power,
            speed: self.speed,
            absorptivity: self.absorbed_power(cmd.ned) / self.nominal_power,
            radius: cmd.radius,
            depth: cmd.depth,
        };
        b.validate()?;
        Ok(b)
    }
}

/// Something that responds to heat-source commands with melt-pool
/// dimensions (m).
pub trait Plant {
    /// Observation before the first command.
    fn initial(&self) -> [f64; 2];
    fn apply(&mut self, cmd: &Command) -> Result<[f64; 2]>;
}

/// First-order lag toward the surrogate's steady-state dimensions:
/// `o_i = λ·o_{i−1} + (1 − λ)·o_ss(u_i)`.
#[derive(Debug, Clone)]
pub struct SurrogatePlant<'a> {
    pub surrogate: &'a Surrogate,
    pub constants: ProcessConstants,
    pub lag: f64,
    state: [f64; 2],
    start: [f64; 2],
}

impl<'a> SurrogatePlant<'a> {
    /// Starts at the steady state of `start`.
    pub fn new(surrogate: &'a Surrogate, constants: ProcessConstants, lag: f64, start: &Command) -> Result<Self> {
        if !(0.0..1.0).contains(&lag) {
            return Err(Error::InvalidInput(format!("lag must lie in [0, 1), got {lag}")));
        }
        let mut p = SurrogatePlant { surrogate, constants, lag, state: [0.0; 2], start: [0.0; 2] };
        p.state = p.steady(start)?;
        p.start = p.state;
        Ok(p)
    }

    /// Steady dimensions under a constant command.
    pub fn steady(&self, cmd: &Command) -> Result<[f64; 2]> {
        let c = &self.constants;
        let e = c.nominal_power / c.speed;
        let eta = (c.absorbed_power(cmd.ned) / c.nominal_power).clamp(MIN_ABSORPTIVITY, 1.0);
        let (w, d, _) = self.surrogate.predict([e, cmd.depth / e, eta / e, cmd.radius / e]);
        if !(w.is_finite() && d.is_finite()) {
            return Err(Error::InvalidInput("surrogate returned non-finite dimensions".into()));
        }
        Ok([w.max(0.0), d.max(0.0)])
    }
}

impl Plant for SurrogatePlant<'_> {
    fn initial(&self) -> [f64; 2] {
        self.start
    }

    fn apply(&mut self, cmd: &Command) -> Result<[f64; 2]> {
        let ss = self.steady(cmd)?;
        for a in 0..2 {
            self.state[a] = self.lag * self.state[a] + (1.0 - self.lag) * ss[a];
        }
        Ok(self.state)
    }
}

/// Solver-backed plant: each command drives the beam for one control
/// interval along a single track; dimensions are read `trace_lag` behind
/// the beam.
pub struct SolverPlant {
    pub sim: Simulation,
    pub constants: ProcessConstants,
    pub interval: f64,
    start: [f64; 2],
}

impl SolverPlant {
    /// `start` drives the beam for `warmup_time` before the first
    /// observation.
    pub fn new(mut sim: Simulation, constants: ProcessConstants, interval: f64, start: &Command, warmup_time: f64) -> Result<Self> {
        if !(interval > 0.0) {
            return Err(Error::InvalidInput("control interval must be positive".into()));
        }
        sim.set_beam(constants.beam(start)?)?;
        sim.advance_to(sim.state.time + warmup_time)?;
        let mut p = SolverPlant { sim, constants, interval, start: [0.0; 2] };
        p.start = p.measure();
        Ok(p)
    }

    fn measure(&self) -> [f64; 2] {
        let t = self.sim.state.time;
        let x = self.sim.path().pose_at(t).map_or(0.0, |(p, _)| p[0]) - self.sim.config.trace_lag;
        let d = extract_meltpool_dims(&self.sim.state, &self.sim.domain, &self.sim.material, x);
        [d.width, d.depth]
    }
}

impl Plant for SolverPlant {
    fn initial(&self) -> [f64; 2] {
        self.start
    }

    fn apply(&mut self, cmd: &Command) -> Result<[f64; 2]> {
        if self.sim.finished() {
            return Err(Error::InvalidInput("scan path exhausted".into()));
        }
        self.sim.set_beam(self.constants.beam(cmd)?)?;
        let t = self.sim.state.time + self.interval;
        self.sim.advance_to(t)?;
        Ok(self.measure())
    }
}

/// Box of training commands. Radius follows depth at a fixed ratio, so
/// commands have two degrees of freedom like the observations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct CommandBox {
    pub ned: (f64, f64),
    pub depth: (f64, f64),
    pub radius_per_depth: f64,
    /// Chance per step of drawing a new command.
    pub switch_probability: f64,
}

impl Default for CommandBox {
    fn default() -> Self {
        CommandBox { ned: (2.4, 4.6), depth: (6e-5, 1.15e-4), radius_per_depth: 0.5, switch_probability: 0.35 }
    }
}

impl CommandBox {
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Command {
        let depth = rng.random_range(self.depth.0..self.depth.1);
        Command { ned: rng.random_range(self.ned.0..self.ned.1), radius: self.radius_per_depth * depth, depth }
    }

    pub fn center(&self) -> Command {
        let depth = 0.5 * (self.depth.0 + self.depth.1);
        Command { ned: 0.5 * (self.ned.0 + self.ned.1), radius: self.radius_per_depth * depth, depth }
    }
}

/// Piecewise-constant random command sequences applied to fresh plants.
pub fn generate_traces<'p, P, F>(make_plant: F, commands: &CommandBox, n_traces: usize, steps: usize, seed: u64) -> Result<Vec<ControlTrace>>
where
    P: Plant + 'p,
    F: Fn(&Command) -> Result<P>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_traces)
        .map(|_| {
            let start = commands.sample(&mut rng);
            let mut plant = make_plant(&start)?;
            let mut obs = vec![plant.initial()];
            let mut cmds = Vec::with_capacity(steps);
            let mut cmd = commands.sample(&mut rng);
            for _ in 0..steps {
                if rng.random_bool(commands.switch_probability) {
                    cmd = commands.sample(&mut rng);
                }
                obs.push(plant.apply(&cmd)?);
                cmds.push(cmd);
            }
            Ok(ControlTrace { observations: obs, commands: cmds })
        })
        .collect()
}

/// One closed-loop step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoopStep {
    pub step: usize,
    pub target: [f64; 2],
    pub command: Command,
    pub realized: [f64; 2],
    /// `|AR − AR*| / AR*` with `AR = D/W`.
    pub discrepancy: f64,
}

pub fn loop_csv(steps: &[LoopStep]) -> String {
    let mut out = String::from("step,W_target,D_target,NED,r_b,d,W,D,aspect_discrepancy\n");
    for s in steps {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            s.step, s.target[0], s.target[1], s.command.ned, s.command.radius, s.command.depth, s.realized[0], s.realized[1], s.discrepancy
        ));
    }
    out
}

/// Track `targets` by feeding realized history and the next target to the
/// network and applying its command.
pub fn closed_loop(model: &ControlModel, plant: &mut dyn Plant, targets: &[[f64; 2]]) -> Result<Vec<LoopStep>> {
    let mut history = vec![plant.initial()];
    let mut out = Vec::with_capacity(targets.len());
    for (step, &target) in targets.iter().enumerate() {
        let command = model.command(&history, target)?;
        let realized = plant
            .apply(&command)
            .map_err(|e| Error::PlantDivergence { step, source: Box::new(e) })?;
        if !(realized[0] > 0.0 && realized[1].is_finite()) {
            return Err(Error::PlantDivergence {
                step,
                source: Box::new(Error::InvalidInput(format!("plant returned {realized:?}"))),
            });
        }
        let ar = realized[1] / realized[0];
        let ar_t = target[1] / target[0];
        out.push(LoopStep { step, target, command, realized, discrepancy: (ar - ar_t).abs() / ar_t });
        history.push(realized);
    }
    Ok(out)
}

/// Depth following a logistic step from `d0` to `d1` centred at `n/2`,
/// width held at `w`.
pub fn sigmoid_targets(w: f64, d0: f64, d1: f64, n: usize, steepness: f64) -> Vec<[f64; 2]> {
    (0..n)
        .map(|i| {
            let s = 1.0 / (1.0 + (-(i as f64 - 0.5 * n as f64) / steepness).exp());
            [w, d0 + (d1 - d0) * s]
        })
        .collect()
}
