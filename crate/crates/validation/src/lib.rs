//! Holds the `acceptance` test target, which prints one PASS/FAIL line per criterion.
