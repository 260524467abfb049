use crate::fields::{FieldRequirement, FieldType};
use crate::tree::{Answer, DecisionTree, LeafNode, Node, QuestionNode};

fn question(id: &str, prompt: &str, answers: &[(&str, &str, &str)]) -> Node {
    Node::Question(QuestionNode {
        id: id.to_string(),
        prompt: prompt.to_string(),
        answers: answers.iter().map(|(a, label, target)| Answer::new(a, label, target)).collect(),
    })
}

fn leaf(id: &str, prescription: &str, fields: Vec<FieldRequirement>) -> Node {
    Node::Leaf(LeafNode { id: id.to_string(), prescription: prescription.to_string(), fields })
}

/// The built-in data retrievability tree: 8 questions, 10 leaves.
///
/// The left half handles datasets that cannot be published (alternative
/// access routes), the right half datasets that can (raw vs. preprocessed
/// availability and how preprocessing was done).
pub fn canonical_tree() -> DecisionTree {
    use FieldType::*;
    let req = FieldRequirement::required;
    let opt = FieldRequirement::optional;

    let nodes = vec![
        question(
            "Q_SHAREABLE",
            "Can the dataset be shared (made publicly available)?",
            &[("yes", "Yes", "Q_RAW_PUBLIC"), ("no", "No", "Q_OTHER_ACCESS")],
        ),
        question(
            "Q_OTHER_ACCESS",
            "Are there other methods to access the data?",
            &[("no", "No", "L_NOT_RETRIEVABLE"), ("yes", "Yes", "Q_FULLY_ACCESSIBLE")],
        ),
        question(
            "Q_FULLY_ACCESSIBLE",
            "Is the data fully accessible (all information viewable)?",
            &[("yes", "Yes", "L_ACCESS_FULL"), ("no", "No", "L_ACCESS_PARTIAL")],
        ),
        question(
            "Q_RAW_PUBLIC",
            "Is the raw dataset public?",
            &[("no", "No", "Q_PRE_PUBLIC"), ("yes", "Yes", "Q_PREP_AVAILABLE")],
        ),
        question(
            "Q_PRE_PUBLIC",
            "Is the preprocessed dataset public?",
            &[("yes", "Yes", "L_PRE_LINK"), ("no", "No", "L_ACQUISITION")],
        ),
        question(
            "Q_PREP_AVAILABLE",
            "Are the preprocessing methods available?",
            &[("no", "No", "L_RAW_DESCRIBE"), ("yes", "Yes", "Q_PREP_METHOD")],
        ),
        question(
            "Q_PREP_METHOD",
            "How was the dataset preprocessed?",
            &[
                ("script", "With a script", "L_RAW_SCRIPT"),
                ("tool", "With a tool", "Q_TOOL_PUBLIC"),
                ("other", "By other methods", "L_RAW_INSTRUCTIONS"),
            ],
        ),
        question(
            "Q_TOOL_PUBLIC",
            "Is the tool publicly available?",
            &[("yes", "Yes", "L_RAW_TOOL_PUBLIC"), ("no", "No", "L_RAW_TOOL_PRIVATE")],
        ),
        leaf(
            "L_NOT_RETRIEVABLE",
            "The dataset cannot be retrieved by others. State why (for example the regulation that forbids sharing).",
            vec![req("reason", Text, "Why the data cannot be shared or accessed, e.g. the governing regulation")],
        ),
        leaf(
            "L_ACCESS_FULL",
            "Describe the procedure other researchers follow to access the data.",
            vec![req("access_procedure", Text, "Steps to obtain access, e.g. request form, offline workstation, collaboration agreement")],
        ),
        leaf(
            "L_ACCESS_PARTIAL",
            "Describe which parts of the data are accessible and the procedure to access them.",
            vec![
                req("accessible_information", Text, "Which records, attributes or aggregates can be viewed"),
                req("access_procedure", Text, "Steps to obtain access to the accessible part"),
            ],
        ),
        leaf(
            "L_PRE_LINK",
            "Provide the source link to the preprocessed dataset.",
            vec![req("preprocessed_url", Url, "Persistent link (URL or DOI) to the preprocessed dataset")],
        ),
        leaf(
            "L_ACQUISITION",
            "Describe how to obtain the raw and/or preprocessed dataset, e.g. a formal request to a platform.",
            vec![
                req("acquisition_procedure", Text, "How to request or otherwise obtain the data"),
                opt("platform_url", Url, "Link to the platform that handles requests"),
            ],
        ),
        leaf(
            "L_RAW_DESCRIBE",
            "Provide the source of the raw dataset and describe how it was processed, if preprocessing was applied.",
            vec![
                req("raw_url", Url, "Link (URL or DOI) to the raw dataset"),
                opt("processing_description", Text, "Description of the preprocessing steps, if any were applied"),
            ],
        ),
        leaf(
            "L_RAW_SCRIPT",
            "Provide the raw dataset together with the preprocessing script.",
            vec![
                req("raw_url", Url, "Link (URL or DOI) to the raw dataset"),
                req("script_ref", Path, "Path or link to the preprocessing script"),
                opt("script_sha256", Text, "SHA-256 digest of the script file"),
            ],
        ),
        leaf(
            "L_RAW_TOOL_PUBLIC",
            "Provide the raw dataset and the preprocessing tool, with the tool version and its configuration parameters if any.",
            vec![
                req("raw_url", Url, "Link (URL or DOI) to the raw dataset"),
                req("tool_name", Text, "Name of the preprocessing tool"),
                req("tool_url", Url, "Where the tool can be obtained"),
                req("tool_version", Version, "Exact tool version used"),
                opt("tool_config", KeyValue, "Configuration parameters as key=value pairs"),
            ],
        ),
        leaf(
            "L_RAW_TOOL_PRIVATE",
            "Provide the raw dataset and describe the tool used, with its version and configuration parameters if any.",
            vec![
                req("raw_url", Url, "Link (URL or DOI) to the raw dataset"),
                req("tool_name", Text, "Name and short description of the preprocessing tool"),
                req("tool_version", Version, "Exact tool version used"),
                opt("tool_config", KeyValue, "Configuration parameters as key=value pairs"),
            ],
        ),
        leaf(
            "L_RAW_INSTRUCTIONS",
            "Provide the raw dataset and instructions for processing it.",
            vec![
                req("raw_url", Url, "Link (URL or DOI) to the raw dataset"),
                req("processing_instructions", Text, "Step-by-step instructions to reproduce the preprocessing"),
            ],
        ),
    ];

    DecisionTree { id: "data-retrievability".to_string(), version: 1, root: "Q_SHAREABLE".to_string(), nodes }
}
