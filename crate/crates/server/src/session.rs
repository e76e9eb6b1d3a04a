//! Per-session state and the cache dependency chain.
//!
//! Stages form a chain: timestep matrix, run matrix, tree, assignment,
//! partition. Invalidating a stage clears it and every stage after it.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::Serialize;

use hyperslice_core::clustering::{ClusterAssignment, ClusterTree, ColorAssignment, Linkage};
use hyperslice_core::ensemble::Ensemble;
use hyperslice_core::partition::{Partition, SvmConfig, SvmModel};
use hyperslice_core::similarity::{DistanceMatrix, ShiftOptions, TimestepMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Timestep,
    RunMatrix,
    Tree,
    Assignment,
    Partition,
}

/// Inputs of the timestep matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SamplingParams {
    pub seed_count: usize,
    pub rng_seed: u64,
}

/// Inputs of the run matrix on top of a timestep matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RunParams {
    pub interval: Option<(f64, f64)>,
    pub shift: Option<ShiftOptions>,
}

pub struct TimestepStage {
    pub params: SamplingParams,
    pub matrix: Arc<TimestepMatrix>,
}

pub struct RunStage {
    pub params: RunParams,
    pub matrix: DistanceMatrix,
}

pub struct TreeStage {
    pub linkage: Linkage,
    pub tree: ClusterTree,
}

/// How the current assignment was cut from the tree.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase", tag = "kind")]
pub enum Cut {
    Height { height: f64 },
    Count { count: usize },
    Subtree { node: usize, height: f64 },
}

pub struct AssignmentStage {
    pub cut: Cut,
    pub assignment: ClusterAssignment,
    pub colors: ColorAssignment,
}

pub struct PartitionStage {
    pub config: SvmConfig,
    pub model: SvmModel,
    pub partition: Partition,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "lowercase", tag = "status")]
pub enum JobStatus {
    Running,
    Done,
    /// Superseded by a newer distance request before finishing.
    Cancelled,
    Failed { error: String },
}

pub struct Session {
    pub id: String,
    pub ensemble: Arc<Ensemble>,
    pub timestep: Option<TimestepStage>,
    pub run_matrix: Option<RunStage>,
    pub tree: Option<TreeStage>,
    pub assignment: Option<AssignmentStage>,
    pub partition: Option<PartitionStage>,
    pub expression: Option<String>,
    pub jobs: BTreeMap<u64, JobStatus>,
    /// Job whose result will be installed when it finishes.
    pub active_job: Option<(u64, SamplingParams, RunParams)>,
    next_job: u64,
}

impl Session {
    pub fn new(id: String, ensemble: Ensemble) -> Self {
        Self {
            id,
            ensemble: Arc::new(ensemble),
            timestep: None,
            run_matrix: None,
            tree: None,
            assignment: None,
            partition: None,
            expression: None,
            jobs: BTreeMap::new(),
            active_job: None,
            next_job: 1,
        }
    }

    /// Clears `stage` and everything downstream of it.
    pub fn invalidate(&mut self, stage: Stage) {
        if stage <= Stage::Timestep {
            self.timestep = None;
            if let Some((job, _, _)) = self.active_job.take() {
                self.jobs.insert(job, JobStatus::Cancelled);
            }
        }
        if stage <= Stage::RunMatrix {
            self.run_matrix = None;
        }
        if stage <= Stage::Tree {
            self.tree = None;
        }
        if stage <= Stage::Assignment {
            self.assignment = None;
        }
        if stage <= Stage::Partition {
            self.partition = None;
            self.expression = None;
        }
    }

    /// Registers a new timestep-matrix job, superseding any running one.
    pub fn start_job(&mut self, sampling: SamplingParams, run: RunParams) -> u64 {
        self.invalidate(Stage::Timestep);
        let id = self.next_job;
        self.next_job += 1;
        self.jobs.insert(id, JobStatus::Running);
        self.active_job = Some((id, sampling, run));
        id
    }

    /// Installs a finished job's result unless the job was superseded.
    pub fn finish_job(&mut self, job: u64, result: Result<(TimestepMatrix, DistanceMatrix), String>) {
        let Some((active, sampling, run)) = self.active_job else {
            return;
        };
        if active != job {
            return;
        }
        self.active_job = None;
        match result {
            Ok((dt, dr)) => {
                self.timestep = Some(TimestepStage {
                    params: sampling,
                    matrix: Arc::new(dt),
                });
                self.run_matrix = Some(RunStage { params: run, matrix: dr });
                self.jobs.insert(job, JobStatus::Done);
            }
            Err(error) => {
                self.jobs.insert(job, JobStatus::Failed { error });
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use hyperslice_core::clustering::{assign_colors, hierarchical_cluster, prune, Palette};
    use hyperslice_core::ensemble::{Run, ScalarField, Timestep};
    use hyperslice_core::partition::train_svm;
    use hyperslice_core::similarity::{compute_run_matrix, compute_timestep_matrix};

    fn ensemble() -> Ensemble {
        let runs = (0..4)
            .map(|i| Run {
                name: format!("r{i}"),
                parameters: vec![i as f64],
                timesteps: vec![Timestep {
                    t: 0.0,
                    field: ScalarField::new(vec![2], vec![(i % 2) as f32, 0.5]).unwrap(),
                }],
            })
            .collect();
        Ensemble::new(vec!["p".into()], runs).unwrap()
    }

    fn full_session() -> Session {
        let mut s = Session::new("s".into(), ensemble());
        let sampling = SamplingParams {
            seed_count: 4,
            rng_seed: 0,
        };
        let run = RunParams {
            interval: None,
            shift: None,
        };
        let job = s.start_job(sampling, run);
        let dt = compute_timestep_matrix(&s.ensemble, 4, 0).unwrap();
        let dr = compute_run_matrix(&dt, None, None).unwrap();
        s.finish_job(job, Ok((dt, dr.clone())));
        let tree = hierarchical_cluster(&dr, Linkage::Single).unwrap();
        let assignment = prune(&tree, 0.5).unwrap();
        let colors = assign_colors(&tree, &assignment, Palette::Set1, None);
        let cfg = SvmConfig::default_for(1);
        let model = train_svm(&s.ensemble, &assignment, cfg).unwrap();
        let partition = Partition::build(&s.ensemble, &assignment, Some(&colors), &model, &[5]).unwrap();
        s.tree = Some(TreeStage {
            linkage: Linkage::Single,
            tree,
        });
        s.assignment = Some(AssignmentStage {
            cut: Cut::Height { height: 0.5 },
            assignment,
            colors,
        });
        s.partition = Some(PartitionStage {
            config: cfg,
            model,
            partition,
        });
        s.expression = Some("p".into());
        s
    }

    fn present(s: &Session) -> [bool; 5] {
        [
            s.timestep.is_some(),
            s.run_matrix.is_some(),
            s.tree.is_some(),
            s.assignment.is_some(),
            s.partition.is_some(),
        ]
    }

    #[test]
    fn invalidation_clears_downstream_only() {
        let cases = [
            (Stage::Timestep, [false; 5]),
            (Stage::RunMatrix, [true, false, false, false, false]),
            (Stage::Tree, [true, true, false, false, false]),
            (Stage::Assignment, [true, true, true, false, false]),
            (Stage::Partition, [true, true, true, true, false]),
        ];
        for (stage, want) in cases {
            let mut s = full_session();
            assert_eq!(present(&s), [true; 5]);
            s.invalidate(stage);
            assert_eq!(present(&s), want, "{stage:?}");
            assert!(s.expression.is_none());
        }
    }

    #[test]
    fn superseded_job_is_discarded() {
        let mut s = Session::new("s".into(), ensemble());
        let sampling = SamplingParams {
            seed_count: 4,
            rng_seed: 0,
        };
        let run = RunParams {
            interval: None,
            shift: None,
        };
        let first = s.start_job(sampling, run);
        let second = s.start_job(SamplingParams { rng_seed: 1, ..sampling }, run);
        assert_eq!(s.jobs[&first], JobStatus::Cancelled);
        let dt = compute_timestep_matrix(&s.ensemble, 4, 0).unwrap();
        let dr = compute_run_matrix(&dt, None, None).unwrap();
        s.finish_job(first, Ok((dt.clone(), dr.clone())));
        assert!(s.timestep.is_none());
        s.finish_job(second, Ok((dt, dr)));
        assert_eq!(s.timestep.as_ref().unwrap().params.rng_seed, 1);
        assert_eq!(s.jobs[&second], JobStatus::Done);
    }
}
