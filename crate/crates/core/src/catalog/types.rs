use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::patch::PatchPrimitive;

/// How a dark pattern changes the user's choice architecture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DarkAttribute {
    Asymmetric,
    Covert,
    Deceptive,
    InformationHiding,
    Restrictive,
    DisparateTreatment,
}

impl DarkAttribute {
    pub const ALL: [DarkAttribute; 6] = [
        DarkAttribute::Asymmetric,
        DarkAttribute::Covert,
        DarkAttribute::Deceptive,
        DarkAttribute::InformationHiding,
        DarkAttribute::Restrictive,
        DarkAttribute::DisparateTreatment,
    ];

    pub fn label(self) -> &'static str {
        match self {
            DarkAttribute::Asymmetric => "Asymmetric",
            DarkAttribute::Covert => "Covert",
            DarkAttribute::Deceptive => "Deceptive",
            DarkAttribute::InformationHiding => "Information Hiding",
            DarkAttribute::Restrictive => "Restrictive",
            DarkAttribute::DisparateTreatment => "Disparate Treatment",
        }
    }

    /// Default hover text for the attribute tag. Catalog files may override
    /// these through `attribute_tooltips`.
    pub fn tooltip(self) -> &'static str {
        match self {
            DarkAttribute::Asymmetric => {
                "makes the option the site prefers easier to pick than the alternatives that serve you better"
            }
            DarkAttribute::Covert => "steers your decision in a way you are unlikely to notice",
            DarkAttribute::Deceptive => "leads you to a false belief through misleading statements, visuals, or omissions",
            DarkAttribute::InformationHiding => "obscures or delays information you need to make an informed choice",
            DarkAttribute::Restrictive => "eliminates certain choices that should be available to you",
            DarkAttribute::DisparateTreatment => "treats some users worse than others, disadvantaging a particular group",
        }
    }
}

impl fmt::Display for DarkAttribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WelfareCategory {
    FinancialLoss,
    PrivacyInvasion,
    CognitiveBurden,
}

impl WelfareCategory {
    pub const ALL: [WelfareCategory; 3] =
        [WelfareCategory::FinancialLoss, WelfareCategory::PrivacyInvasion, WelfareCategory::CognitiveBurden];

    pub fn label(self) -> &'static str {
        match self {
            WelfareCategory::FinancialLoss => "Financial Loss",
            WelfareCategory::PrivacyInvasion => "Invasion of Privacy",
            WelfareCategory::CognitiveBurden => "Cognitive Burden",
        }
    }
}

impl fmt::Display for WelfareCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// When an intervention acts relative to the user's interaction with the
/// pattern: before it, during it, or after it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dimension {
    Design,
    Behavior,
    Outcome,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InterventionStrategy {
    Hiding,
    Fairness,
    InformationDisclosure,
    CounterfactualThinking,
    Disabling,
    ActionGuide,
    Friction,
    Reflection,
}

impl InterventionStrategy {
    pub const ALL: [InterventionStrategy; 8] = [
        InterventionStrategy::Hiding,
        InterventionStrategy::Fairness,
        InterventionStrategy::InformationDisclosure,
        InterventionStrategy::CounterfactualThinking,
        InterventionStrategy::Disabling,
        InterventionStrategy::ActionGuide,
        InterventionStrategy::Friction,
        InterventionStrategy::Reflection,
    ];

    /// The only place the strategy-to-dimension mapping lives.
    pub fn dimension(self) -> Dimension {
        use InterventionStrategy::*;
        match self {
            Hiding | Fairness | InformationDisclosure => Dimension::Design,
            CounterfactualThinking | Disabling | ActionGuide | Friction => Dimension::Behavior,
            Reflection => Dimension::Outcome,
        }
    }

    pub fn definition(self) -> &'static str {
        use InterventionStrategy::*;
        match self {
            Hiding => "Remove the dark pattern from view",
            Fairness => "Remove the visual advantage one option has over the others",
            InformationDisclosure => "Surface the information the dark pattern keeps out of sight",
            CounterfactualThinking => "Prompt the user to question the dark pattern",
            Disabling => "Switch off the functionality behind the dark pattern",
            ActionGuide => "Offer concrete guidance on how to respond to the dark pattern",
            Friction => "Insert extra steps into the interaction the dark pattern encourages",
            Reflection => "Encourage the user to reflect on what the dark pattern has cost them",
        }
    }

    pub fn label(self) -> &'static str {
        use InterventionStrategy::*;
        match self {
            Hiding => "Hiding",
            Fairness => "Fairness",
            InformationDisclosure => "Information Disclosure",
            CounterfactualThinking => "Counterfactual Thinking",
            Disabling => "Disabling",
            ActionGuide => "Action Guide",
            Friction => "Friction",
            Reflection => "Reflection",
        }
    }
}

impl fmt::Display for InterventionStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleKind {
    AttributeRegex,
    InnerTextContains,
    StructuralSelector,
}

/// One declarative predicate over an element.
///
/// `target` is the attribute name for `attribute-regex`, the selector for
/// `structural-selector`, and empty for `inner-text-contains`. `pattern` is the
/// regex source or the literal substring. `scope`, when present, requires a
/// strict ancestor matching that selector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionRule {
    pub kind: RuleKind,
    #[serde(default)]
    pub target: String,
    #[serde(default)]
    pub pattern: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scope: Option<String>,
}

impl DetectionRule {
    pub fn attribute_regex(attr: &str, pattern: &str) -> Self {
        DetectionRule { kind: RuleKind::AttributeRegex, target: attr.into(), pattern: pattern.into(), scope: None }
    }

    pub fn inner_text(literal: &str) -> Self {
        DetectionRule { kind: RuleKind::InnerTextContains, target: String::new(), pattern: literal.into(), scope: None }
    }

    pub fn selector(selector: &str) -> Self {
        DetectionRule {
            kind: RuleKind::StructuralSelector,
            target: selector.into(),
            pattern: String::new(),
            scope: None,
        }
    }

    pub fn within(mut self, scope: &str) -> Self {
        self.scope = Some(scope.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Impact {
    pub category: WelfareCategory,
    pub severity_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DarkPatternSpec {
    pub id: String,
    pub name: String,
    pub site: String,
    pub pattern_types: Vec<String>,
    pub attributes: BTreeSet<DarkAttribute>,
    pub mechanism_text: String,
    pub impact: Impact,
    pub rules: Vec<DetectionRule>,
    pub enhancement_ids: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreviewRefs {
    pub before: String,
    pub after: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnhancementSpec {
    pub id: String,
    pub pattern_id: String,
    pub strategy: InterventionStrategy,
    pub effect_text: String,
    pub patch: Vec<PatchPrimitive>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preview: Option<PreviewRefs>,
}

impl EnhancementSpec {
    pub fn dimension(&self) -> Dimension {
        self.strategy.dimension()
    }
}
