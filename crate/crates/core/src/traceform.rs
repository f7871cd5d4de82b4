//! Scattering determinant, trace formulas, Dirichlet and Krein identities.
