use num_complex::Complex64;
use wva_core::hypothesis::{critical_point_for_alpha, DecisionRule};
use wva_core::{MeasurementSetup, NoiseModel, TwoStateVector};

use crate::args::CommonArgs;
use crate::error::{CliError, CliResult};

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    G,
    C,
    /// Modulus of the weak value; the phase of the base weak value is kept.
    Aw,
    S,
}

impl Axis {
    pub fn column(&self) -> &'static str {
        match self {
            Axis::G => "g",
            Axis::C => "c",
            Axis::Aw => "aw",
            Axis::S => "s",
        }
    }

    fn parse(s: &str) -> CliResult<Self> {
        match s {
            "g" => Ok(Axis::G),
            "c" => Ok(Axis::C),
            "aw" => Ok(Axis::Aw),
            "s" => Ok(Axis::S),
            _ => Err(usage(format!("unknown sweep axis '{s}' (expected g, c, aw or s)"))),
        }
    }
}

/// `steps` evenly spaced values from `start` to `stop` inclusive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
}

impl Range {
    pub fn parse(text: &str) -> CliResult<Self> {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(usage(format!("expected start:stop:steps, got '{text}'")));
        }
        let num = |s: &str| -> CliResult<f64> {
            s.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| usage(format!("'{s}' is not a finite number")))
        };
        let steps: usize = parts[2]
            .trim()
            .parse()
            .map_err(|_| usage(format!("'{}' is not a step count", parts[2])))?;
        if steps < 2 {
            return Err(usage(format!("a range needs at least 2 steps, got {steps}")));
        }
        Ok(Self {
            start: num(parts[0])?,
            stop: num(parts[1])?,
            steps,
        })
    }

    pub fn values(&self) -> Vec<f64> {
        let last = (self.steps - 1) as f64;
        (0..self.steps)
            .map(|k| {
                if k + 1 == self.steps {
                    self.stop
                } else {
                    self.start + (self.stop - self.start) * k as f64 / last
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub axis: Axis,
    pub range: Range,
}

impl Sweep {
    pub fn parse(text: &str) -> CliResult<Self> {
        let (axis, rest) = text
            .split_once(':')
            .ok_or_else(|| usage(format!("expected axis:start:stop:steps, got '{text}'")))?;
        Ok(Self {
            axis: Axis::parse(axis.trim())?,
            range: Range::parse(rest)?,
        })
    }
}

/// The rejection threshold, given directly or through the significance level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    CriticalPoint(f64),
    Alpha(f64),
}

/// One fully specified parameter point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Params {
    pub sigma: f64,
    pub g: f64,
    pub weak_value: Complex64,
    pub i_state: TwoStateVector,
    pub f_state: Option<TwoStateVector>,
    pub threshold: Threshold,
    pub noise_s: f64,
}

impl Params {
    pub fn setup(&self) -> CliResult<MeasurementSetup> {
        Ok(match self.f_state {
            Some(f) => MeasurementSetup::new(self.i_state, Some(f), self.g, self.sigma)?,
            None => MeasurementSetup::with_weak_value(self.i_state, self.weak_value, self.g, self.sigma)?,
        })
    }

    pub fn noise(&self) -> CliResult<NoiseModel> {
        Ok(NoiseModel::new(self.noise_s)?)
    }

    pub fn critical_point(&self) -> CliResult<f64> {
        match self.threshold {
            Threshold::CriticalPoint(c) => Ok(c),
            Threshold::Alpha(a) => Ok(critical_point_for_alpha(a, self.noise()?, self.sigma)?),
        }
    }

    pub fn rule(&self) -> CliResult<DecisionRule> {
        Ok(DecisionRule::with_critical_point(self.critical_point()?)?)
    }

    pub fn with_axis(&self, axis: Axis, value: f64) -> Self {
        let mut p = *self;
        match axis {
            Axis::G => p.g = value,
            Axis::C => p.threshold = Threshold::CriticalPoint(value),
            Axis::Aw => {
                let phase = if self.weak_value == Complex64::new(0.0, 0.0) {
                    0.0
                } else {
                    self.weak_value.arg()
                };
                p.weak_value = Complex64::from_polar(value, phase);
            }
            Axis::S => p.noise_s = value,
        }
        p
    }
}

/// Parsed command line: a base parameter point, up to two swept axes and sampling settings.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub base: Params,
    pub sweeps: Vec<Sweep>,
    pub samples: usize,
    pub seed: u64,
}

/// One grid point: the swept values (in sweep order) and the parameters there.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub coords: Vec<f64>,
    pub params: Params,
}

fn parse_state(text: &str) -> CliResult<TwoStateVector> {
    match text.trim() {
        "plus" => return Ok(TwoStateVector::plus_state()),
        "minus" => return Ok(TwoStateVector::minus_state()),
        "balanced" => return Ok(TwoStateVector::balanced()),
        _ => {}
    }
    let parts: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| usage(format!("state '{text}' must be plus, minus, balanced or four comma-separated reals")))?;
    if parts.len() != 4 {
        return Err(usage(format!("state '{text}' needs four reals, got {}", parts.len())));
    }
    Ok(TwoStateVector::from_parts(parts[0], parts[1], parts[2], parts[3])?)
}

impl Scenario {
    pub fn from_args(args: &CommonArgs) -> CliResult<Self> {
        let threshold = match (args.c, args.alpha) {
            (Some(c), _) => Threshold::CriticalPoint(c),
            (None, Some(a)) => Threshold::Alpha(a),
            (None, None) => Threshold::Alpha(CommonArgs::DEFAULT_ALPHA),
        };
        let f_state = args.f_state.as_deref().map(parse_state).transpose()?;
        let base = Params {
            sigma: args.sigma,
            g: args.g,
            weak_value: Complex64::new(args.weak_value_re, args.weak_value_im),
            i_state: parse_state(&args.i_state)?,
            f_state,
            threshold,
            noise_s: args.noise_s,
        };
        let sweeps: Vec<Sweep> = args.sweep.iter().map(|s| Sweep::parse(s)).collect::<CliResult<_>>()?;
        if sweeps.len() > 2 {
            return Err(usage(format!("at most two swept axes are supported, got {}", sweeps.len())));
        }
        if sweeps.len() == 2 && sweeps[0].axis == sweeps[1].axis {
            return Err(usage("the two swept axes must differ"));
        }
        for sweep in &sweeps {
            if sweep.axis == Axis::Aw && base.f_state.is_some() {
                return Err(usage("an aw sweep needs the weak-value flags, not --f-state"));
            }
            if sweep.axis != Axis::G && sweep.range.start.min(sweep.range.stop) < 0.0 {
                return Err(usage(format!("{} sweep must be non-negative", sweep.axis.column())));
            }
        }
        if args.samples == 0 {
            return Err(usage("--samples must be at least 1"));
        }
        let scenario = Self {
            base,
            sweeps,
            samples: args.samples,
            seed: args.seed,
        };
        // Surface invalid base parameters as usage errors before any work starts.
        scenario.base.noise()?;
        Ok(scenario)
    }

    /// Cartesian product of the swept axes, first axis outermost.
    pub fn grid(&self) -> Vec<GridPoint> {
        let mut points = vec![GridPoint {
            coords: Vec::new(),
            params: self.base,
        }];
        for sweep in &self.sweeps {
            let values = sweep.range.values();
            points = points
                .into_iter()
                .flat_map(|p| {
                    values.iter().map(move |&v| {
                        let mut coords = p.coords.clone();
                        coords.push(v);
                        GridPoint {
                            coords,
                            params: p.params.with_axis(sweep.axis, v),
                        }
                    })
                })
                .collect();
        }
        points
    }

    pub fn axis_columns(&self) -> Vec<String> {
        self.sweeps.iter().map(|s| s.axis.column().to_string()).collect()
    }
}
