use super::{LabelScheme, Level};

/// The five discursive categories of the US Supreme Court opinion scheme.
pub fn scotus_category_scheme() -> LabelScheme {
    LabelScheme::new(
        "scotus-category",
        Level::Category,
        [
            "Setting the scene",
            "Analysis",
            "Resolution",
            "Sources of authority",
            "Announcing",
        ],
    )
    .expect("static scheme is valid")
}

/// The thirteen rhetorical functions of the US Supreme Court opinion scheme.
pub fn scotus_function_scheme() -> LabelScheme {
    LabelScheme::new(
        "scotus-function",
        Level::Function,
        [
            "Accepting arguments/a reasoning",
            "Announcing",
            "Citing",
            "Describing",
            "Evaluating the impact of the decision",
            "Giving instructions to competent courts",
            "Giving the holding of the Court",
            "Granting certiorari",
            "Presenting jurisdiction",
            "Quoting",
            "Recalling",
            "Rejecting arguments/a reasoning",
            "Stating the Court\u{2019}s reasoning",
        ],
    )
    .expect("static scheme is valid")
}
