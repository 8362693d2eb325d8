use super::*;
use crate::scene::{
    FrameDetections, FrameId, GroundBounds, Mobile, MobileClass, Point2, Point3, SceneContext,
};

fn context() -> SceneContext {
    SceneContext::new(
        GroundBounds {
            min: Point2::new(0.0, 0.0),
            max: Point2::new(50.0, 40.0),
        },
        25.0,
    )
}

fn tracker() -> GroupTracker {
    GroupTracker::new(TrackerParams::default(), &context()).unwrap()
}

fn person(id: u64, frame: u64, x: f64, y: f64) -> Mobile {
    let mut m = Mobile::new(id, FrameId(frame), Point3::new(x, y, 0.0), Point3::new(0.5, 0.5, 1.7));
    m.class = MobileClass::Person;
    m
}

fn frame(f: u64, mobiles: Vec<Mobile>) -> FrameDetections {
    FrameDetections {
        frame: FrameId(f),
        mobiles,
    }
}

fn feed(t: &mut GroupTracker, frames: Vec<FrameDetections>) -> Vec<StepOutput> {
    let mut out = Vec::new();
    for f in frames {
        out.extend(t.push_frame(f).unwrap());
    }
    out
}

#[test]
fn probable_group_from_direct_father() {
    let mut t = tracker();
    feed(
        &mut t,
        vec![
            frame(10, vec![person(5, 10, 1.0, 1.0)]),
            frame(11, vec![person(7, 11, 1.0, 1.1).with_father(5, 0.8)]),
        ],
    );
    t.seed_group(FrameId(0), &[]);
    t.seed_group(FrameId(0), &[]);
    let g3 = t.seed_group(FrameId(10), &[5]);
    assert_eq!(g3, 3);
    assert_eq!(t.probable_group(7, FrameId(11)), Some(3));
}

#[test]
fn weak_link_gives_no_probable_group() {
    let mut t = tracker();
    feed(
        &mut t,
        vec![
            frame(10, vec![person(5, 10, 1.0, 1.0)]),
            frame(11, vec![person(7, 11, 1.0, 1.1).with_father(5, 0.5)]),
        ],
    );
    t.seed_group(FrameId(10), &[5]);
    assert_eq!(t.probable_group(7, FrameId(11)), None);
}

#[test]
fn probable_group_through_ungrouped_father() {
    // 1 (frame 9, in the group) <- 2 (frame 10, ungrouped) <- 3 (frame 11)
    let mut t = tracker();
    feed(
        &mut t,
        vec![
            frame(9, vec![person(1, 9, 1.0, 1.0)]),
            frame(10, vec![person(2, 10, 1.0, 1.0).with_father(1, 0.9)]),
            frame(11, vec![person(3, 11, 1.0, 1.0).with_father(2, 0.9)]),
        ],
    );
    t.seed_group(FrameId(0), &[]);
    t.seed_group(FrameId(0), &[]);
    t.seed_group(FrameId(9), &[1]);
    assert_eq!(t.group_of(2, FrameId(10)), None);
    assert_eq!(t.probable_group(3, FrameId(11)), Some(3));
}

#[test]
fn ancestors_outside_window_are_ignored() {
    let mut t = tracker();
    feed(
        &mut t,
        vec![
            frame(0, vec![person(1, 0, 1.0, 1.0)]),
            frame(30, vec![person(1, 30, 1.0, 1.0).with_father(1, 0.9)]),
        ],
    );
    t.seed_group(FrameId(0), &[1]);
    assert_eq!(t.probable_group(1, FrameId(30)), None);
}

#[test]
fn update_admits_only_matching_probable_group() {
    let mut t = tracker();
    feed(
        &mut t,
        vec![
            frame(
                10,
                vec![person(1, 10, 1.0, 1.0), person(2, 10, 1.5, 1.0), person(3, 10, 2.0, 1.0)],
            ),
            frame(
                11,
                vec![
                    person(1, 11, 1.0, 1.0).with_father(1, 0.9),
                    person(2, 11, 1.5, 1.0).with_father(2, 0.9),
                    person(3, 11, 2.0, 1.0),
                ],
            ),
        ],
    );
    let g1 = t.seed_group(FrameId(10), &[1, 2]);
    let out = t.update_groups(FrameId(11), &[vec![1, 2, 3]]);
    assert_eq!(out.admitted.get(&1), Some(&g1));
    assert_eq!(out.admitted.get(&2), Some(&g1));
    assert_eq!(out.unassigned, vec![vec![3]]);
    assert_eq!(t.group_of(3, FrameId(11)), None);
}

#[test]
fn clusters_without_probable_group_go_to_creation() {
    let mut t = tracker();
    feed(&mut t, vec![frame(5, vec![person(1, 5, 1.0, 1.0), person(2, 5, 1.2, 1.0)])]);
    let out = t.update_groups(FrameId(5), &[vec![1, 2]]);
    assert!(out.admitted.is_empty());
    assert_eq!(out.unassigned, vec![vec![1, 2]]);
}

#[test]
fn two_clusters_may_feed_one_group() {
    let mut t = tracker();
    feed(
        &mut t,
        vec![
            frame(10, vec![person(1, 10, 1.0, 1.0), person(2, 10, 9.0, 1.0)]),
            frame(
                11,
                vec![person(1, 11, 1.0, 1.0).with_father(1, 0.9), person(2, 11, 9.0, 1.0).with_father(2, 0.9)],
            ),
        ],
    );
    let g = t.seed_group(FrameId(10), &[1, 2]);
    let out = t.update_groups(FrameId(11), &[vec![1], vec![2]]);
    assert_eq!(out.admitted.len(), 2);
    assert!(out.admitted.values().all(|x| *x == g));
}

#[test]
fn merge_keeps_older_group() {
    let mut t = tracker();
    feed(
        &mut t,
        vec![
            frame(0, vec![person(1, 0, 1.0, 1.0)]),
            frame(1, vec![person(1, 1, 1.0, 1.0).with_father(1, 0.9), person(2, 1, 2.0, 1.0)]),
            frame(2, vec![person(3, 2, 1.5, 1.0).with_father(1, 0.9).with_father(2, 0.9)]),
        ],
    );
    let old = t.seed_group(FrameId(0), &[1]);
    let young = t.seed_group(FrameId(1), &[2]);
    let events = t.merge_groups(FrameId(1), 20);
    assert_eq!(events.len(), 1);
    assert_eq!(events[0].kind, LifecycleKind::Merged);
    assert_eq!(events[0].groups, vec![old, young]);
    assert!(t.group(young).is_none());
    let g = t.group(old).unwrap();
    assert_eq!(g.members_at(FrameId(1)).unwrap().iter().copied().collect::<Vec<_>>(), vec![2]);
    assert_eq!(t.group_of(2, FrameId(1)), Some(old));
}

#[test]
fn merge_survivor_is_the_earlier_created_group() {
    let mut t = tracker();
    feed(
        &mut t,
        vec![
            frame(40, vec![person(1, 40, 1.0, 1.0), person(2, 40, 2.0, 1.0)]),
            frame(41, vec![person(3, 41, 1.5, 1.0).with_father(1, 0.9).with_father(2, 0.9)]),
        ],
    );
    let g1 = t.seed_group(FrameId(10), &[]);
    let g2 = t.seed_group(FrameId(40), &[2]);
    t.assign(g1, 1, FrameId(40));
    let events = t.merge_groups(FrameId(40), 20);
    assert_eq!(events.len(), 1);
    assert_eq!(events[0].survivor(), Some(g1));
    assert_eq!(events[0].groups, vec![g1, g2]);
    let members = t.group(g1).unwrap().members_at(FrameId(40)).unwrap();
    assert_eq!(members.len(), 2);
}

#[test]
fn no_shared_son_no_merge() {
    let mut t = tracker();
    feed(
        &mut t,
        vec![
            frame(0, vec![person(1, 0, 1.0, 1.0), person(2, 0, 5.0, 1.0)]),
            frame(1, vec![person(1, 1, 1.0, 1.0).with_father(1, 0.9), person(2, 1, 5.0, 1.0).with_father(2, 0.9)]),
        ],
    );
    t.seed_group(FrameId(0), &[1]);
    t.seed_group(FrameId(0), &[2]);
    assert!(t.merge_groups(FrameId(0), 20).is_empty());
    assert_eq!(t.groups().count(), 2);
}

#[test]
fn termination_after_stale_horizon() {
    let mut t = tracker();
    let g = t.seed_group(FrameId(100), &[1]);
    let recent = t.seed_group(FrameId(150), &[2]);
    let empty_recent = t.seed_group(FrameId(190), &[]);
    assert!(t.terminate_groups(FrameId(200)).is_empty());
    let events = t.terminate_groups(FrameId(201));
    assert_eq!(events.len(), 1);
    assert_eq!(events[0].kind, LifecycleKind::Terminated);
    assert_eq!(events[0].groups, vec![g]);
    assert!(t.group(recent).is_some());
    assert!(t.group(empty_recent).is_some());
}

#[test]
fn out_of_order_frames_rejected() {
    let mut t = tracker();
    t.push_frame(frame(5, vec![])).unwrap();
    assert!(matches!(t.push_frame(frame(4, vec![])), Err(TrackerError::OutOfOrder { .. })));
    assert!(t.push_frame(frame(5, vec![])).is_err());
}

fn pair_walk(frames: u64) -> Vec<FrameDetections> {
    (0..frames)
        .map(|f| {
            let x = 5.0 + 0.04 * f as f64;
            let mut ms = vec![person(1, f, x, 10.0), person(2, f, x, 10.6)];
            if f > 0 {
                ms[0] = ms[0].clone().with_father(1, 0.95);
                ms[1] = ms[1].clone().with_father(2, 0.95);
            }
            frame(f, ms)
        })
        .collect()
}

#[test]
fn pair_walking_together_forms_one_group() {
    let mut t = tracker();
    let mut out = feed(&mut t, pair_walk(100));
    out.extend(t.flush().unwrap());
    assert_eq!(out.len(), 100);
    let created: Vec<_> = out
        .iter()
        .flat_map(|o| &o.events)
        .filter(|e| e.kind == LifecycleKind::Created)
        .collect();
    assert_eq!(created.len(), 1);
    assert_eq!(created[0].frame, FrameId(0));
    for o in &out {
        assert_eq!(o.snapshots.len(), 1, "frame {}", o.frame);
        let s = &o.snapshots[0];
        assert_eq!(s.members.len(), 2);
        // 0.6 m apart, identical velocity
        assert!((s.incoherence.value - 7.0 * 0.6).abs() < 1e-6, "{:?}", s.incoherence);
    }
}

#[test]
fn outputs_are_delayed_by_window() {
    let mut t = tracker();
    let frames = pair_walk(25);
    for (i, f) in frames.into_iter().enumerate() {
        let out = t.push_frame(f).unwrap();
        if i < 20 {
            assert!(out.is_empty());
        } else {
            assert_eq!(out.len(), 1);
            assert_eq!(out[0].frame, FrameId(i as u64 - 20));
        }
    }
}

#[test]
fn lone_person_creates_nothing() {
    let mut t = tracker();
    let frames = (0..60)
        .map(|f| {
            let mut m = person(1, f, 3.0 + 0.05 * f as f64, 3.0);
            if f > 0 {
                m = m.with_father(1, 0.9);
            }
            frame(f, vec![m])
        })
        .collect();
    let mut out = feed(&mut t, frames);
    out.extend(t.flush().unwrap());
    assert!(out.iter().all(|o| o.events.is_empty() && o.snapshots.is_empty()));
}

#[test]
fn lone_group_blob_creates_singleton_group() {
    let mut t = tracker();
    let frames = (0..40)
        .map(|f| {
            let mut m = Mobile::new(1, FrameId(f), Point3::new(3.0, 3.0 + 0.03 * f as f64, 0.0), Point3::new(1.5, 1.5, 1.7));
            m.class = MobileClass::GroupOfPersons;
            if f > 0 {
                m = m.with_father(1, 0.9);
            }
            frame(f, vec![m])
        })
        .collect();
    let mut out = feed(&mut t, frames);
    out.extend(t.flush().unwrap());
    let created = out.iter().flat_map(|o| &o.events).filter(|e| e.kind == LifecycleKind::Created).count();
    assert_eq!(created, 1);
    assert!(out.iter().all(|o| o.snapshots.len() == 1 && o.snapshots[0].incoherence.value == 0.0));
}

#[test]
fn membership_is_unique_per_frame() {
    let mut t = tracker();
    let mut out = feed(&mut t, pair_walk(60));
    out.extend(t.flush().unwrap());
    for o in &out {
        let mut seen = std::collections::BTreeSet::new();
        for s in &o.snapshots {
            for m in &s.members {
                assert!(seen.insert(*m));
            }
        }
    }
}
