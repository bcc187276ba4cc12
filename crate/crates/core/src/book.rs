//! The user guide, compiled as doc-tests.
//!
//! Each module includes one chapter of the mdbook under `book/src`, so
//! `cargo test` builds and runs every code block in the book against the
//! current API. If the book drifts from the code, the build says so.

macro_rules! chapter {
    ($name:ident, $file:literal) => {
        #[doc = include_str!(concat!("../../../book/src/", $file))]
        pub mod $name {}
    };
}

chapter!(introduction, "introduction.md");
chapter!(determinantal_sampling, "determinantal-sampling.md");
chapter!(filtering, "filtering.md");
chapter!(embeddings, "embeddings.md");
chapter!(proof_search, "proof-search.md");
chapter!(transition_logs, "transition-logs.md");
chapter!(metrics, "metrics.md");
chapter!(cli, "cli.md");
