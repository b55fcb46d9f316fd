"""HTTP service exposing puzzle derivation, solving, calibration and verification."""
