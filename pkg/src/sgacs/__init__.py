"""Sine-Gordon dynamics on analogue curved spacetime."""
