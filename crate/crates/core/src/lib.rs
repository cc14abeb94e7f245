pub mod autodiff;
pub mod config;
pub mod data;
pub mod networks;
pub mod losses;
pub mod trainer;
pub mod metrics;
pub mod experiment;
pub mod projection;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    struct Introduction;
    #[doc = include_str!("../../../book/src/data.md")]
    struct Data;
    #[doc = include_str!("../../../book/src/autodiff.md")]
    struct Autodiff;
    #[doc = include_str!("../../../book/src/model.md")]
    struct Model;
    #[doc = include_str!("../../../book/src/objective.md")]
    struct Objective;
    #[doc = include_str!("../../../book/src/training.md")]
    struct Training;
    #[doc = include_str!("../../../book/src/evaluation.md")]
    struct Evaluation;
    #[doc = include_str!("../../../book/src/cli.md")]
    struct Cli;
    #[doc = include_str!("../../../book/src/experiments.md")]
    struct Experiments;
}
