//! Prompt operators and their rendering.
//!
//! Each operator carries a fixed few-shot demonstration (an input followed by
//! an answer in the expected response format) that is prepended verbatim to
//! the rendered input.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::LlmError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum OperatorKind {
    /// Synonym generation for a trigger.
    Syn,
    /// Coreferential event-mention generation.
    Ce,
    /// Non-coreferential event-mention generation.
    Nce,
    /// Prefix/suffix paraphrasing.
    Para,
    /// Temporal-commonsense prefix/suffix generation.
    Tc,
}

impl fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OperatorKind::Syn => "SYN",
            OperatorKind::Ce => "CE",
            OperatorKind::Nce => "NCE",
            OperatorKind::Para => "PARA",
            OperatorKind::Tc => "TC",
        })
    }
}

/// A prompt template bound to one or more operator steps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptOperator {
    /// Stable name, e.g. `SYN+NCE`; recorded with every exchange.
    pub name: String,
    pub steps: Vec<OperatorKind>,
    pub slots: BTreeSet<String>,
    pub template: String,
    pub demonstration_input: String,
    pub demonstration_response: String,
}

impl PromptOperator {
    /// Creates an operator, checking that the template references only declared slots.
    pub fn new(
        steps: Vec<OperatorKind>,
        slots: &[&str],
        template: impl Into<String>,
        demonstration_input: impl Into<String>,
        demonstration_response: impl Into<String>,
    ) -> Result<Self, LlmError> {
        let template = template.into();
        let slots: BTreeSet<String> = slots.iter().map(|s| s.to_string()).collect();
        for referenced in referenced_slots(&template) {
            if !slots.contains(&referenced) {
                return Err(LlmError::Template {
                    slot: referenced,
                    message: "referenced by the template but not declared".into(),
                });
            }
        }
        let name = steps.iter().map(ToString::to_string).collect::<Vec<_>>().join("+");
        Ok(PromptOperator {
            name,
            steps,
            slots,
            template,
            demonstration_input: demonstration_input.into(),
            demonstration_response: demonstration_response.into(),
        })
    }

    /// The demonstration block as it appears at the top of every prompt.
    pub fn demonstration(&self) -> String {
        if self.demonstration_input.is_empty() && self.demonstration_response.is_empty() {
            return String::new();
        }
        format!("{}\n{}", self.demonstration_input, self.demonstration_response)
    }
}

/// Slot names referenced as `{name}` in a template, in order of first use.
fn referenced_slots(template: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close) if is_slot_name(&after[..close]) => {
                let name = after[..close].to_string();
                if !out.contains(&name) {
                    out.push(name);
                }
                rest = &after[close + 1..];
            }
            _ => rest = after,
        }
    }
    out
}

fn is_slot_name(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
}

/// Fills every `{slot}` of the operator's template and prepends the demonstration.
///
/// Output is a pure function of the operator and slot values.
pub fn render_prompt(op: &PromptOperator, slots: &BTreeMap<String, String>) -> Result<String, LlmError> {
    let mut body = String::with_capacity(op.template.len() + 256);
    let mut rest = op.template.as_str();
    while let Some(open) = rest.find('{') {
        body.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close) if is_slot_name(&after[..close]) => {
                let name = &after[..close];
                let value = slots.get(name).ok_or_else(|| LlmError::Template {
                    slot: name.to_string(),
                    message: "missing value".into(),
                })?;
                body.push_str(value);
                rest = &after[close + 1..];
            }
            _ => {
                body.push('{');
                rest = after;
            }
        }
    }
    body.push_str(rest);
    let demo = op.demonstration();
    if demo.is_empty() {
        Ok(body)
    } else {
        Ok(format!("{demo}\n\n{body}"))
    }
}

/// Convenience for building slot maps from literal pairs.
pub fn slot_map<const N: usize>(pairs: [(&str, &str); N]) -> BTreeMap<String, String> {
    pairs
        .into_iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

const TWO_STEP_INTRO: &str = "Please perform a two-step task based on commonsense inference.";

const SYN_NCE_TEMPLATE: &str = "Please perform a two-step task based on commonsense inference.
Step1: Can you give me five similar expressions for the given word extracted from a sentence? Given word: `{trigger}' from `{sentence}' Please show all expressions here.
Step2: Try to use each expression in Step1 as the event head lemma to generate event mention not coreferential to the event induced by the event head lemma `{trigger}' in the given text: `{sentence}' Noting that, the human participants, non-human participants, times and locations in generated event mention content should be not conferential to and different from those in the given text, keeping the sentence structure same as the given text as possible.";

const SYN_NCE_DEMO_INPUT: &str = "Please perform a two-step task based on commonsense inference.
Step1: Can you give me five similar expressions for the given word extracted from a sentence? Given word: `fire' from `A man has been charged on suspicion of arson following a fire that devastated a Somerset supermarket.' Please show all expressions here.
Step2: Try to use each expression in Step1 as the event head lemma to generate event mention not coreferential to the event induced by the event head lemma `fire' in the given text: `A man has been charged on suspicion of arson following a fire that devastated a Somerset supermarket.' Noting that, the human participants, non-human participants, times and locations in generated event mention content should be not conferential to and different from those in the given text, keeping the sentence structure same as the given text as possible.";

const SYN_NCE_DEMO_RESPONSE: &str = "Expressions: blaze, inferno, conflagration, flames, combustion
Event mentions:
1. A woman has been charged with arson after a blaze at the local library in Bristol.
2. A teenager has been charged with arson after an inferno at the shopping mall in Birmingham.
3. A basketball athlete has been charged with arson after a conflagration at the historic museum in York.
...";

const SYN_CE_TEMPLATE: &str = "Please perform a two-step task based on commonsense inference.
Step1: Can you give me five similar expressions for the given word extracted from a sentence? Given word: `{trigger}' from `{sentence}' Please show all expressions here.
Step2: Try to use each expression in Step1 as the event head lemma to generate event mention coreferential to the event induced by the event head lemma `{trigger}' in the given text: `{sentence}' Noting that, the human participants, non-human participants, times and locations in generated event mention content should be coreferential to those in the given text, but the sentence structure can be different from the given text.";

const SYN_CE_DEMO_INPUT: &str = "Please perform a two-step task based on commonsense inference.
Step1: Can you give me five similiar expressions for the given word extracted from the sentence? Given word: `free throw' from `McDermott broke Rodney Buford's school scoring record of 2,116 points with a free throw with 4:43 to play in the first half.' Please show all expressions here.
Step2: Try to use each expression in Step1 as the event head lemma to generate event mention coreferential to the event induced by the event head lemma `free throw' in the given text: `McDermott broke Rodney Buford's school scoring record of 2,116 points with a free throw with 4:43 to play in the first half.' Noting that, the human participants, non-human participants, times and locations in generated event mention content should be coreferential to those in the given text, but the sentence structure can be different from the given text.";

const SYN_CE_DEMO_RESPONSE: &str = "Expressions: basketball shot, scoring toss, uncontested shot, charity toss, foul shot
Event mentions:
1. McDermott broke Rodney Buford's school scoring record of 2,116 points with a basketball shot at 4:43 remaining in the first half.
2. McDermott surpassed Rodney Buford's school scoring record of 2,116 points with a scoring toss in the first half with 4:43 left on the clock.
3. McDermott set a new school scoring record of 2,116 points with an uncontested shot during the first half with 4:43 remaining.
...";

const NCE_TEMPLATE: &str = "Please use the given word as the event head lemma to generate five event mentions not coreferential to the event induced by the event head lemma `{trigger}' in the given text: `{sentence}' Every generated event mention must contain the word `{trigger}' unchanged. Noting that, the human participants, non-human participants, times and locations in generated event mention content should be not conferential to and different from those in the given text, keeping the sentence structure same as the given text as possible.";

const NCE_DEMO_INPUT: &str = "Please use the given word as the event head lemma to generate five event mentions not coreferential to the event induced by the event head lemma `fire' in the given text: `A man has been charged on suspicion of arson following a fire that devastated a Somerset supermarket.' Every generated event mention must contain the word `fire' unchanged. Noting that, the human participants, non-human participants, times and locations in generated event mention content should be not conferential to and different from those in the given text, keeping the sentence structure same as the given text as possible.";

const NCE_DEMO_RESPONSE: &str = "Event mentions:
1. A woman has been charged with arson after a fire at the local library in Bristol.
2. A teenager has been charged with arson after a fire at the shopping mall in Birmingham.
3. A basketball athlete has been charged with arson after a fire at the historic museum in York.
...";

const CE_TEMPLATE: &str = "Please use the given word as the event head lemma to generate five event mentions coreferential to the event induced by the event head lemma `{trigger}' in the given text: `{sentence}' Every generated event mention must contain the word `{trigger}' unchanged. Noting that, the human participants, non-human participants, times and locations in generated event mention content should be coreferential to those in the given text, but the sentence structure can be different from the given text.";

const CE_DEMO_INPUT: &str = "Please use the given word as the event head lemma to generate five event mentions coreferential to the event induced by the event head lemma `free throw' in the given text: `McDermott broke Rodney Buford's school scoring record of 2,116 points with a free throw with 4:43 to play in the first half.' Every generated event mention must contain the word `free throw' unchanged. Noting that, the human participants, non-human participants, times and locations in generated event mention content should be coreferential to those in the given text, but the sentence structure can be different from the given text.";

const CE_DEMO_RESPONSE: &str = "Event mentions:
1. McDermott broke Rodney Buford's school scoring record of 2,116 points with a free throw at 4:43 remaining in the first half.
2. McDermott surpassed Rodney Buford's school scoring record of 2,116 points with a free throw in the first half with 4:43 left on the clock.
3. McDermott set a new school scoring record of 2,116 points with a free throw during the first half with 4:43 remaining.
...";

const PARA_TEMPLATE: &str = "We have a snippet of text: `{text}'
The text can be divided into prefix, mention and suffix as following:
Prefix: `{prefix}'
Mention: `{mention}'
Suffix: `{suffix}'
Can you paraphrase Prefix and Suffix in five different ways, where human participants, non-human participants, times, locations and actions in generated examples are conferential to those in the original one?";

const PARA_DEMO_INPUT: &str = "We have a snippet of text: `Indianapolis Colts clinch playoff berth with win over Kansas City Chiefs December 23, 2012. Going into week 16, the Indianapolis Colts controlled their own destiny of making it to post-season play. The Colts could clinch a playoff berth with a win over the Kansas City Chiefs or a Pittsburgh Steelers loss. As they have done all season, the Colts refused to let their fate be decided by anyone other than themselves. The young team fought hard to defeat the Chiefs in another fourth quarter victory, 20-13. Although they started the game with a three-and-out, the Colts were able to light up the scoreboard first.'
The text can be divided into prefix, mention and suffix as following:
Prefix: `Indianapolis Colts clinch playoff berth with win over Kansas City Chiefs December 23, 2012. Going into week 16, the Indianapolis Colts controlled their own destiny of making it to post-season play.'
Mention: `The Colts could clinch a playoff berth with a win over the Kansas City Chiefs or a Pittsburgh Steelers loss.'
Suffix: `As they have done all season, the Colts refused to let their fate be decided by anyone other than themselves. The young team fought hard to defeat the Chiefs in another fourth quarter victory, 20-13. Although they started the game with a three-and-out, the Colts were able to light up the scoreboard first.'
Can you paraphrase Prefix and Suffix in five different ways, where human participants, non-human participants, times, locations and actions in generated examples are conferential to those in the original one?";

const PARA_DEMO_RESPONSE: &str = "Prefix:
1. The Indianapolis Colts secured a spot in the playoffs by defeating the Kansas City Chiefs on December 23, 2012, in week 16 of the season. The Colts had control of their own destiny and could have also clinched a playoff berth with a Pittsburgh Steelers loss.
2. On December 23, 2012, the Indianapolis Colts earned a playoff spot by winning against the Kansas City Chiefs in week 16. The Colts had the power to determine their own fate and could have also secured a playoff berth if the Pittsburgh Steelers lost.
...
Suffix:
1. Throughout the season, the Indianapolis Colts refused to let anyone else decide their fate. In another fourth-quarter victory, the young team fought hard to defeat the Kansas City Chiefs with a score of 20-13, despite starting the game with a three-and-out.
2. The Indianapolis Colts demonstrated their determination to control their own destiny throughout the season. They fought hard to secure another fourth-quarter victory against the Kansas City Chiefs, winning 20-13, despite starting the game with a three-and-out.
...";

const TC_TEMPLATE: &str = "We have a template sentence: `{sentence}' Please generate three Prefixes and Suffixes for the template sentence. Prefix content should be about what typically happens before the event head lemma `{trigger}' in the given template sentence, while Suffix content should be about what typically happens after the event head lemma `{trigger}' in the given template sentence. Note: Each generated Prefix or Suffix contains three sentences.";

const TC_DEMO_INPUT: &str = "We have a template sentence: `A publicist says Tara Reid has checked herself into rehab.' Please generate three Prefixes and Suffixes for the template sentence. Prefix content should be about what typically happens before the event head lemma `checked herself' in the given template sentence, while Suffix content should be about what typically happens after the event head lemma `checked herself' in the given template sentence. Note: Each generated Prefix or Suffix contains three sentences.";

const TC_DEMO_RESPONSE: &str = "Prefixes:
1. `After a series of public appearances where she appeared to be under the influence, rumors began to circulate that Tara Reid was struggling with addiction. Friends and family members reportedly urged her to seek help and get treatment before things got worse.'
2. `Tara Reid often faces mounting pressure from friends, family, and inner demons. The weight of her addiction or mental health challenges becomes increasingly burdensome. Seeking relief and stability, she reaches a breaking point where seeking professional help is no longer just an option, but a necessity.'
...
Suffixes:
1. `Reid's representatives have confirmed that she is taking her recovery seriously and is committed to staying in rehab for as long as necessary. She has also expressed gratitude for the support she has received from fans and loved ones during this difficult time. It is hoped that with the help of professionals, she will be able to overcome her addiction and move forward in a positive direction.'
2. `Tara Reid begins a transformative journey towards healing after checking herself into rehab. She commits herself to a comprehensive treatment plan tailored to her specific needs. With dedication and the support of professionals, she embarks on a path of self-discovery, growth, and sobriety.'
...";

fn builtin(
    steps: Vec<OperatorKind>,
    slots: &[&str],
    template: &str,
    demo_in: &str,
    demo_out: &str,
) -> PromptOperator {
    PromptOperator::new(steps, slots, template, demo_in, demo_out).expect("built-in templates declare their slots")
}

/// Synonyms for `{trigger}` plus non-coreferential mentions using them.
pub fn syn_nce() -> PromptOperator {
    debug_assert!(SYN_NCE_TEMPLATE.starts_with(TWO_STEP_INTRO));
    builtin(
        vec![OperatorKind::Syn, OperatorKind::Nce],
        &["trigger", "sentence"],
        SYN_NCE_TEMPLATE,
        SYN_NCE_DEMO_INPUT,
        SYN_NCE_DEMO_RESPONSE,
    )
}

/// Synonyms for `{trigger}` plus coreferential mentions using them.
pub fn syn_ce() -> PromptOperator {
    debug_assert!(SYN_CE_TEMPLATE.starts_with(TWO_STEP_INTRO));
    builtin(
        vec![OperatorKind::Syn, OperatorKind::Ce],
        &["trigger", "sentence"],
        SYN_CE_TEMPLATE,
        SYN_CE_DEMO_INPUT,
        SYN_CE_DEMO_RESPONSE,
    )
}

/// Non-coreferential mentions that keep `{trigger}` verbatim.
pub fn nce() -> PromptOperator {
    builtin(
        vec![OperatorKind::Nce],
        &["trigger", "sentence"],
        NCE_TEMPLATE,
        NCE_DEMO_INPUT,
        NCE_DEMO_RESPONSE,
    )
}

/// Coreferential mentions that keep `{trigger}` verbatim.
pub fn ce() -> PromptOperator {
    builtin(
        vec![OperatorKind::Ce],
        &["trigger", "sentence"],
        CE_TEMPLATE,
        CE_DEMO_INPUT,
        CE_DEMO_RESPONSE,
    )
}

pub fn para() -> PromptOperator {
    builtin(
        vec![OperatorKind::Para],
        &["text", "prefix", "mention", "suffix"],
        PARA_TEMPLATE,
        PARA_DEMO_INPUT,
        PARA_DEMO_RESPONSE,
    )
}

pub fn tc() -> PromptOperator {
    builtin(
        vec![OperatorKind::Tc],
        &["sentence", "trigger"],
        TC_TEMPLATE,
        TC_DEMO_INPUT,
        TC_DEMO_RESPONSE,
    )
}

/// Every shipped operator.
pub fn builtin_operators() -> Vec<PromptOperator> {
    vec![syn_nce(), syn_ce(), nce(), ce(), para(), tc()]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_demonstration_first() {
        let slots = slot_map([
            ("trigger", "died"),
            (
                "sentence",
                "Golden girl of screen and pool, Esther Williams, has died peacefully in her sleep aged 91.",
            ),
        ]);
        let prompt = render_prompt(&syn_nce(), &slots).unwrap();
        let demo_at = prompt.find("Given word: `fire'").unwrap();
        let input_at = prompt.find("Given word: `died'").unwrap();
        assert!(demo_at < input_at);
        assert!(prompt.contains("Esther Williams, has died peacefully"));
        assert!(prompt.starts_with(&syn_nce().demonstration()));
        assert_eq!(prompt, render_prompt(&syn_nce(), &slots).unwrap());
    }

    #[test]
    fn slot_free_template_renders_verbatim() {
        let op = PromptOperator::new(vec![OperatorKind::Syn], &[], "no slots here", "", "").unwrap();
        assert_eq!(render_prompt(&op, &BTreeMap::new()).unwrap(), "no slots here");
    }

    #[test]
    fn missing_slot_is_named() {
        let slots = slot_map([("sentence", "x")]);
        match render_prompt(&syn_nce(), &slots) {
            Err(LlmError::Template { slot, .. }) => assert_eq!(slot, "trigger"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn undeclared_slot_rejected_at_construction() {
        let err = PromptOperator::new(vec![OperatorKind::Tc], &["a"], "{a} {b}", "", "").unwrap_err();
        assert!(matches!(err, LlmError::Template { slot, .. } if slot == "b"));
    }

    #[test]
    fn braces_that_are_not_slots_pass_through() {
        let op = PromptOperator::new(vec![OperatorKind::Syn], &["x"], "{x} {Not A Slot} {", "", "").unwrap();
        let out = render_prompt(&op, &slot_map([("x", "1")])).unwrap();
        assert_eq!(out, "1 {Not A Slot} {");
    }

    #[test]
    fn operator_names() {
        assert_eq!(syn_nce().name, "SYN+NCE");
        assert_eq!(syn_ce().name, "SYN+CE");
        assert_eq!(para().name, "PARA");
        assert_eq!(tc().name, "TC");
    }
}
