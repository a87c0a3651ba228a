//! Report rendering (filled in with the run orchestration).
