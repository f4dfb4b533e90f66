use std::collections::BTreeMap;
use std::time::Duration;

use livevis_core::scheduler::{JobKind, JobQueue};
use livevis_core::{ParameterSet, RevisionId, SourceState};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

const SESSIONS: [&str; 3] = ["a", "b", "c"];
const DEBOUNCE: Duration = Duration::from_millis(1500);

fn src(n: u32) -> SourceState {
    SourceState::single("minivis", "main.mv", &format!("pixel {{ {n} }}")).unwrap()
}

fn params(generation: u64) -> ParameterSet {
    ParameterSet { generation, ..ParameterSet::default() }
}

fn rev(n: u8) -> RevisionId {
    RevisionId([n; 32])
}

/// Drive the queue with random operations and return the dequeued trace.
fn run(seed: u64, steps: usize) -> Vec<(u64, JobKind, String)> {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut q = JobQueue::new(DEBOUNCE);
    let mut now = Duration::ZERO;
    let mut last_edit: BTreeMap<&str, Duration> = BTreeMap::new();
    let mut generation = 0u64;
    let mut trace = Vec::new();

    for step in 0..steps {
        now += Duration::from_millis(rng.gen_range(0..700));
        let session = SESSIONS[rng.gen_range(0..SESSIONS.len())];
        match rng.gen_range(0..8) {
            0 | 1 => {
                q.on_edit(session, src(step as u32), now);
                last_edit.insert(session, now);
            }
            2 => {
                let due: Vec<&str> = last_edit.iter().filter(|(_, t)| **t + DEBOUNCE <= now).map(|(s, _)| *s).collect();
                assert_eq!(q.advance(now).len(), due.len(), "compiles must follow exactly the quiet edits");
                for s in due {
                    last_edit.remove(s);
                }
            }
            3 => {
                q.enqueue_render(session, rev(rng.gen()), params(generation), now);
            }
            4 => {
                generation += 1;
                let branch: Vec<RevisionId> = (0..rng.gen_range(1..6)).map(rev).collect();
                let params = params(generation);
                let (enq, _) = q.schedule_branch_refresh(session, &branch, &params, now);
                assert_eq!(enq.len(), branch.len());
            }
            5 => {
                if rng.gen_bool(0.1) {
                    q.drop_session(session);
                    last_edit.remove(session);
                }
            }
            _ => {
                let compiles_waiting = q.queued(JobKind::Compile);
                if let Ok(job) = q.next() {
                    if job.kind() == JobKind::Render {
                        assert_eq!(compiles_waiting, 0, "render dequeued while a compile was queued");
                    } else {
                        if rng.gen_bool(0.7) {
                            q.mark_compile_succeeded(&job.session, job.seq);
                        }
                    }
                    trace.push((job.seq, job.kind(), job.session.clone()));
                }
            }
        }
        let s = q.stats();
        assert_eq!(s.enqueued, s.dequeued + s.dropped + q.len() as u64, "a job went missing");
    }
    trace
}

#[test]
fn randomized_runs_keep_queue_invariants() {
    for seed in 0..10 {
        run(seed, 1_000);
    }
}

#[test]
fn replay_is_deterministic() {
    assert_eq!(run(42, 2_000), run(42, 2_000));
}

#[test]
fn rapid_edits_produce_one_compile() {
    let mut q = JobQueue::new(DEBOUNCE);
    for i in 0..20u32 {
        q.on_edit("s", src(i), Duration::from_millis(i as u64 * 100));
        assert!(q.advance(Duration::from_millis(i as u64 * 100)).is_empty());
    }
    let last = Duration::from_millis(1900);
    assert!(q.advance(last + DEBOUNCE - Duration::from_millis(1)).is_empty());
    assert_eq!(q.advance(last + DEBOUNCE).len(), 1);
    let job = q.next().unwrap();
    assert_eq!(job.payload, livevis_core::scheduler::JobPayload::Compile { source: src(19) });
    assert!(q.next().is_err());
}
