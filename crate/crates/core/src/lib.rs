pub mod embeddings;
pub mod evalkit;
pub mod kernel;
pub mod model;
pub mod rng;
pub mod simdata;
pub mod trainer;

/// Snippets from the guide in `book/`, compiled and run as doctests.
#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    struct Introduction;
    #[doc = include_str!("../../../book/src/autodiff.md")]
    struct Autodiff;
    #[doc = include_str!("../../../book/src/embeddings.md")]
    struct Embeddings;
    #[doc = include_str!("../../../book/src/simdata.md")]
    struct Simdata;
    #[doc = include_str!("../../../book/src/model.md")]
    struct ModelChapter;
    #[doc = include_str!("../../../book/src/training.md")]
    struct Training;
    #[doc = include_str!("../../../book/src/evaluation.md")]
    struct Evaluation;
    #[doc = include_str!("../../../book/src/cli.md")]
    struct Cli;
}
