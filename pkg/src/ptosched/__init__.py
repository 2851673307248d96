"""Predict-then-optimize clinician scheduling."""
