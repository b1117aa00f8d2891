//! Holds the `acceptance` test target, which runs every end-to-end
//! criterion against the shipped default configuration. It lives in its own
//! package so the long-running suite reports after the unit and integration
//! tests of the library and the CLI.
