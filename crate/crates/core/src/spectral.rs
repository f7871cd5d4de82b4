//! Bound states, resonances, Hadamard data.
