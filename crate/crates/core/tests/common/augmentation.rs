//! Expected augmentation outcomes on the fixture corpus and a non-panicking
//! invariant checker shared by the fixture tests and the acceptance target.

use ecr_cad::augment::{AugmentKind, AugmentedPair, Segment};
use ecr_cad::{MentionPair, PairLabel};

pub const ESTHER_SOURCE: &str = "ew1_died~ew2_died";
pub const PRINCE: &str = "The renowned musician Prince departed from this world in his studio in Minneapolis at the age of 57.";
pub const PRINCE_TIA: &str = "The renowned musician Prince died from this world in his studio in Minneapolis at the age of 57.";
pub const MICROSOFT_SOURCE: &str = "ms1_address~ms2_protect";
pub const MICROSOFT_CAD: &str = "A statement from Microsoft confirms that the company has secured its customers from malicious attacks by releasing a security update for Internet Explorer.";

/// Every invariant `aug` breaks relative to its source pair; empty when it is valid.
pub fn violations(kind: AugmentKind, src: &MentionPair, aug: &AugmentedPair) -> Vec<String> {
    let id = &aug.pair.pair_id;
    let mut out = Vec::new();
    let mut check = |ok: bool, what: &str| {
        if !ok {
            out.push(format!("{id}: {what}"));
        }
    };
    check(aug.kind == kind, "kind");
    check(aug.source_pair_id == src.pair_id, "source id");
    check(aug.pair.label == src.label.negate(), "label flip");
    check(aug.pair.second.center == src.second.center, "second center preserved");
    check(aug.pair.second.mention_id == src.second.mention_id, "second mention preserved");

    let changed: Vec<Segment> = Segment::ALL
        .iter()
        .copied()
        .filter(|s| s.sentences(src) != s.sentences(&aug.pair))
        .collect();
    check(aug.edited_segments() == changed, "edit ledger lists exactly the changed segments");
    check(changed.contains(&Segment::FirstCenter), "first center edited");

    match kind {
        AugmentKind::Cad | AugmentKind::Tia if src.label == PairLabel::Coref => {
            check(changed == [Segment::FirstCenter], "minimal edit of a coreferential source");
        }
        AugmentKind::Cad | AugmentKind::Tia => {
            check(aug.pair.second == src.second, "second window untouched");
        }
        _ => {}
    }
    if kind == AugmentKind::Tia {
        let original = if src.label == PairLabel::Coref { &src.first } else { &src.second };
        let center = aug.pair.first.center.to_lowercase();
        check(center.contains(&original.trigger.to_lowercase()), "TIA keeps the trigger");
    }
    let w = &aug.pair.first;
    let span: String = w
        .center
        .chars()
        .skip(w.trigger_span.0)
        .take(w.trigger_span.1.saturating_sub(w.trigger_span.0))
        .collect();
    check(span == w.trigger, "trigger span points at the trigger");
    check((0.0..=1.0).contains(&aug.plausibility), "plausibility in [0, 1]");
    out
}
