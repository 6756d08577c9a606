//! A 3x9 grid maze where the agent pays one unit of time per white cell and
//! an uncertain amount per "shaky" cell, and wants to reach the exit cheaply.
//!
//! Cells are indexed `row * 9 + col`. The agent starts at (0,0); the exit
//! (2,8) is absorbing with zero cost. Moves are deterministic; the outcome
//! `xi` only matters on shaky cells, where it is both the stage cost and the
//! observation that updates the belief. White cells reveal nothing, so the
//! belief is frozen there.
//!
//! Two uncertainty variants share the geometry: `uncertain_transition` draws
//! the time-to-cross from a geometric distribution whose success probability
//! is unknown over finitely many candidates (equivalent to repeatedly
//! retrying the move until it succeeds), and `uncertain_cost` draws it from a
//! left-truncated normal whose location parameter is unknown over a
//! continuum.
//!
//! The default mask forces a serpentine all-white route of exactly 18 moves
//! while a straight route through two shaky cells takes 10; whether the
//! shortcut pays off depends on the unknown crossing time, which is what the
//! experiments probe.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Environment, FamilyKind, Horizon, ParameterSpace, ParametricFamily};

pub const MAZE_ROWS: usize = 3;
pub const MAZE_COLS: usize = 9;
/// Start cell (0,0).
pub const MAZE_START: usize = 0;
/// Exit cell (2,8).
pub const MAZE_EXIT: usize = MAZE_ROWS * MAZE_COLS - 1;

/// Default shaky-cell layout: '.' is white, 'x' is shaky.
pub const DEFAULT_MASK: [&str; 3] = [".x...x...", ".x.x.x.x.", "...x...x."];

const UP: usize = 0;
const DOWN: usize = 1;
const LEFT: usize = 2;
const RIGHT: usize = 3;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MazeVariant {
    /// Geometric crossing time with mean `1/theta`; finitely many candidate
    /// success probabilities.
    UncertainTransition {
        theta_space: Vec<f64>,
        theta_true: f64,
        #[serde(default)]
        prior_weights: Option<Vec<f64>>,
    },
    /// Truncated-normal crossing time with unknown location `theta` and known
    /// scale `sigma`; the conjugate normal prior is given by mean/variance.
    UncertainCost {
        sigma: f64,
        theta_true: f64,
        prior_mean: f64,
        prior_variance: f64,
        #[serde(default = "default_theta_lower")]
        theta_lower: f64,
        #[serde(default)]
        theta_upper: Option<f64>,
    },
}

fn default_theta_lower() -> f64 {
    -1e9
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MazeConfig {
    #[serde(default = "default_mask")]
    pub mask: Vec<String>,
    #[serde(default = "default_t_max")]
    pub t_max: usize,
    #[serde(default = "default_discount")]
    pub discount: f64,
    pub variant: MazeVariant,
}

fn default_mask() -> Vec<String> {
    DEFAULT_MASK.iter().map(|r| r.to_string()).collect()
}

fn default_t_max() -> usize {
    40
}

fn default_discount() -> f64 {
    1.0
}

/// Parse the mask into a per-cell shaky flag.
fn parse_mask(mask: &[String]) -> Result<Vec<bool>> {
    if mask.len() != MAZE_ROWS {
        return Err(Error::BadLayout(format!(
            "mask needs {MAZE_ROWS} rows, got {}",
            mask.len()
        )));
    }
    let mut shaky = vec![false; MAZE_ROWS * MAZE_COLS];
    for (r, row) in mask.iter().enumerate() {
        if row.chars().count() != MAZE_COLS {
            return Err(Error::BadLayout(format!(
                "mask row {r} needs {MAZE_COLS} cells, got {:?}",
                row
            )));
        }
        for (c, ch) in row.chars().enumerate() {
            shaky[r * MAZE_COLS + c] = match ch {
                '.' => false,
                'x' | '#' => true,
                other => {
                    return Err(Error::BadLayout(format!(
                        "mask row {r} has unknown cell {other:?} (use '.' or 'x')"
                    )))
                }
            };
        }
    }
    Ok(shaky)
}

/// Breadth-first number of moves from start to exit, stepping only on cells
/// where `passable` holds (the exit itself is always enterable).
fn shortest_moves(passable: impl Fn(usize) -> bool) -> Option<usize> {
    if !passable(MAZE_START) {
        return None;
    }
    let mut dist = vec![usize::MAX; MAZE_ROWS * MAZE_COLS];
    dist[MAZE_START] = 0;
    let mut queue = std::collections::VecDeque::from([MAZE_START]);
    while let Some(cell) = queue.pop_front() {
        if cell == MAZE_EXIT {
            return Some(dist[cell]);
        }
        let (r, c) = (cell / MAZE_COLS, cell % MAZE_COLS);
        let mut push = |nr: usize, nc: usize| {
            let n = nr * MAZE_COLS + nc;
            if dist[n] == usize::MAX && (passable(n) || n == MAZE_EXIT) {
                dist[n] = dist[cell] + 1;
                queue.push_back(n);
            }
        };
        if r > 0 {
            push(r - 1, c);
        }
        if r + 1 < MAZE_ROWS {
            push(r + 1, c);
        }
        if c > 0 {
            push(r, c - 1);
        }
        if c + 1 < MAZE_COLS {
            push(r, c + 1);
        }
    }
    None
}

pub fn build_maze(cfg: &MazeConfig) -> Result<Environment> {
    let shaky = parse_mask(&cfg.mask)?;
    if shaky[MAZE_START] {
        return Err(Error::BadLayout("start cell must be white".into()));
    }
    if shaky[MAZE_EXIT] {
        return Err(Error::BadLayout("exit cell must be white".into()));
    }
    if cfg.t_max == 0 {
        return Err(Error::Config("t_max must be at least one stage".into()));
    }
    let white_route = shortest_moves(|cell| !shaky[cell])
        .ok_or_else(|| Error::BadLayout("no all-white route from start to exit".into()))?;
    if cfg.mask == default_mask() {
        // invariants of the shipped layout: a known-cost route of exactly 18
        // moves, undercut by a 10-move route through shaky cells
        let any_route = shortest_moves(|_| true).expect("grid is connected");
        if white_route != 18 || any_route != 10 {
            return Err(Error::BadLayout(format!(
                "default layout broken: white route {white_route} (want 18), \
                 unrestricted route {any_route} (want 10)"
            )));
        }
    }

    let family = match &cfg.variant {
        MazeVariant::UncertainTransition { theta_space, .. } => ParametricFamily::new(
            FamilyKind::Geometric,
            ParameterSpace::Finite(theta_space.clone()),
        )?,
        MazeVariant::UncertainCost {
            sigma,
            theta_lower,
            theta_upper,
            ..
        } => ParametricFamily::new(
            FamilyKind::TruncatedNormal { sigma: *sigma },
            ParameterSpace::Continuous {
                lower: *theta_lower,
                upper: *theta_upper,
            },
        )?,
    };

    let actions: Vec<Vec<usize>> = (0..MAZE_ROWS * MAZE_COLS)
        .map(|cell| {
            if cell == MAZE_EXIT {
                return vec![UP];
            }
            let (r, c) = (cell / MAZE_COLS, cell % MAZE_COLS);
            let mut acts = Vec::with_capacity(4);
            if r > 0 {
                acts.push(UP);
            }
            if r + 1 < MAZE_ROWS {
                acts.push(DOWN);
            }
            if c > 0 {
                acts.push(LEFT);
            }
            if c + 1 < MAZE_COLS {
                acts.push(RIGHT);
            }
            acts
        })
        .collect();

    let shaky_cost = shaky.clone();
    let shaky_obs = shaky.clone();
    let env = Environment::new(
        family,
        actions,
        |cell, action, _xi| {
            if cell == MAZE_EXIT {
                return MAZE_EXIT;
            }
            let (r, c) = (cell / MAZE_COLS, cell % MAZE_COLS);
            let (nr, nc) = match action {
                UP => (r - 1, c),
                DOWN => (r + 1, c),
                LEFT => (r, c - 1),
                _ => (r, c + 1),
            };
            nr * MAZE_COLS + nc
        },
        move |cell, _action, xi| {
            if cell == MAZE_EXIT {
                0.0
            } else if shaky_cost[cell] {
                xi
            } else {
                1.0
            }
        },
        Horizon::Finite {
            stages: cfg.t_max,
            discount: cfg.discount,
        },
    )?;
    Ok(env
        .with_observation_filter(move |cell| shaky_obs[cell])
        .with_xi_invariant(move |cell, _| !shaky[cell])
        .with_initial_state(MAZE_START)
        .expect("start cell is in range"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn transition_config() -> MazeConfig {
        MazeConfig {
            mask: default_mask(),
            t_max: 40,
            discount: 1.0,
            variant: MazeVariant::UncertainTransition {
                theta_space: vec![1.0 / 5.5, 1.0 / 5.0, 1.0 / 4.5],
                theta_true: 1.0 / 5.5,
                prior_weights: None,
            },
        }
    }

    #[test]
    fn default_layout_routes() {
        let shaky = parse_mask(&default_mask()).unwrap();
        assert_eq!(shortest_moves(|c| !shaky[c]), Some(18));
        assert_eq!(shortest_moves(|_| true), Some(10));
        assert_eq!(shaky.iter().filter(|&&s| s).count(), 8);
    }

    #[test]
    fn exit_is_absorbing_and_free() {
        let env = build_maze(&transition_config()).unwrap();
        assert_eq!(env.actions(MAZE_EXIT), &[UP]);
        let (next, cost) = env.step(MAZE_EXIT, UP, 3.0).unwrap();
        assert_eq!(next, MAZE_EXIT);
        assert_eq!(cost, 0.0);
    }

    #[test]
    fn moves_stay_in_bounds_and_cost_by_cell() {
        let env = build_maze(&transition_config()).unwrap();
        assert_eq!(env.initial_state(), MAZE_START);
        assert_eq!(env.actions(MAZE_START), &[DOWN, RIGHT]);
        let (next, cost) = env.step(MAZE_START, RIGHT, 7.0).unwrap();
        assert_eq!(next, 1);
        assert_eq!(cost, 1.0); // white start cell costs 1 regardless of xi
        let (_, cost) = env.step(1, RIGHT, 7.0).unwrap();
        assert_eq!(cost, 7.0); // shaky (0,1) costs the drawn time
    }

    #[test]
    fn belief_updates_only_on_shaky_cells() {
        let env = build_maze(&transition_config()).unwrap();
        assert!(!env.observes(MAZE_START));
        assert!(env.observes(1)); // (0,1) shaky
        assert!(!env.observes(MAZE_EXIT));
        assert!(env.xi_invariant(MAZE_START, RIGHT));
        assert!(!env.xi_invariant(1, RIGHT));
    }

    #[test]
    fn cost_variant_uses_truncated_normal() {
        let cfg = MazeConfig {
            mask: default_mask(),
            t_max: 40,
            discount: 1.0,
            variant: MazeVariant::UncertainCost {
                sigma: 2.0,
                theta_true: 5.5,
                prior_mean: 0.0,
                prior_variance: 1e6,
                theta_lower: default_theta_lower(),
                theta_upper: None,
            },
        };
        let env = build_maze(&cfg).unwrap();
        assert!(matches!(
            env.family().kind,
            FamilyKind::TruncatedNormal { sigma } if sigma == 2.0
        ));
    }

    #[test]
    fn bad_layouts_are_rejected() {
        let mut cfg = transition_config();
        cfg.mask[0] = "xx...x...".into(); // shaky start
        assert!(build_maze(&cfg).is_err());

        let mut cfg = transition_config();
        cfg.mask = vec!["...".into(); 3]; // wrong width
        assert!(build_maze(&cfg).is_err());

        let mut cfg = transition_config();
        // wall of shaky cells: no all-white route
        cfg.mask = vec![".x.......".into(), ".x.......".into(), ".x.......".into()];
        assert!(build_maze(&cfg).is_err());
    }

    #[test]
    fn custom_all_white_mask_builds() {
        let mut cfg = transition_config();
        cfg.mask = vec![".........".into(); 3];
        let env = build_maze(&cfg).unwrap();
        for cell in 0..27 {
            assert!(!env.observes(cell));
        }
    }
}
