"""Divide-and-conquer Monte Carlo over linked covers of the sample space."""
