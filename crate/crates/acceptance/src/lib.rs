//! Holds the `acceptance` test target; run it with
//! `cargo test -p activesearch-acceptance --test acceptance`.
