use groupscope::dsl::{exemplar, prelude, AlarmLevel};
use groupscope::engine::PrimitiveRegistry;
use groupscope::pipeline::{event_record, recognize, run, track, RecognizeConfig, TrackConfig, TrackOutput};
use groupscope::synth::{generate, Scenario, SynthConfig};
use groupscope::tracker::{parse_lifecycle, write_lifecycle};
use groupscope::{
    parse_context, parse_detections, parse_events, parse_groups, write_context, write_detections, write_events,
    write_groups,
};

fn synth(scenario: Scenario) -> groupscope::synth::SynthOutput {
    generate(&SynthConfig {
        scenario,
        ..SynthConfig::default()
    })
}

#[test]
fn run_equals_track_then_recognize_through_files() {
    let ont = prelude().overlay(&exemplar());
    for scenario in [Scenario::SplitAfter(60), Scenario::MergeAt(80), Scenario::StopNearEquipment] {
        let out = synth(scenario);
        let cfg = RecognizeConfig::default();
        let (tracked, events) = run(
            &out.frames,
            &out.context,
            &ont,
            PrimitiveRegistry::builtin(),
            &TrackConfig::default(),
            &cfg,
        )
        .unwrap();

        // everything crosses a text boundary before recognition
        let frames = parse_detections(&write_detections(out.frames.iter().flat_map(|f| &f.mobiles)))
            .unwrap()
            .frames;
        let ctx = parse_context(&write_context(&out.context)).unwrap();
        let tracked2 = track(&frames, &ctx, &TrackConfig::default()).unwrap();
        let reread = TrackOutput {
            groups: parse_groups(&write_groups(&tracked2.groups)).unwrap(),
            lifecycle: parse_lifecycle(&write_lifecycle(&tracked2.lifecycle)).unwrap(),
        };
        let events2 = recognize(&frames, &reread, &ctx, &ont, PrimitiveRegistry::builtin(), &cfg).unwrap();

        let csv = |es: &[groupscope::engine::RecognizedEvent]| {
            write_events(&es.iter().map(|e| event_record(&ont, e)).collect::<Vec<_>>())
        };
        assert_eq!(write_groups(&tracked.groups), write_groups(&reread.groups), "{scenario}");
        assert_eq!(csv(&events), csv(&events2), "{scenario}");
        assert!(!events.is_empty(), "{scenario}");
        assert_eq!(parse_events(&csv(&events)).unwrap().len(), events.len());
    }
}

#[test]
fn min_alarm_filters() {
    let ont = prelude().overlay(&exemplar());
    let out = synth(Scenario::StopNearEquipment);
    let tracked = track(&out.frames, &out.context, &TrackConfig::default()).unwrap();
    let count = |min_alarm| {
        let cfg = RecognizeConfig {
            min_alarm,
            ..RecognizeConfig::default()
        };
        recognize(&out.frames, &tracked, &out.context, &ont, PrimitiveRegistry::builtin(), &cfg)
            .unwrap()
            .len()
    };
    assert!(count(AlarmLevel::Urgent) >= 1);
    assert_eq!(count(AlarmLevel::VeryUrgent), 0);
}

#[test]
fn output_is_delayed_by_the_window_unless_flushed() {
    let out = synth(Scenario::WalkTogether);
    let last = out.frames.last().unwrap().frame.0;
    let delayed = track(&out.frames, &out.context, &TrackConfig::default()).unwrap();
    let flushed = track(
        &out.frames,
        &out.context,
        &TrackConfig {
            flush: true,
            ..TrackConfig::default()
        },
    )
    .unwrap();
    let max = |t: &TrackOutput| t.groups.iter().map(|g| g.frame.0).max().unwrap();
    assert!(max(&delayed) < last);
    assert_eq!(max(&flushed), last);
    assert_eq!(flushed.groups[..delayed.groups.len()], delayed.groups[..]);
}
