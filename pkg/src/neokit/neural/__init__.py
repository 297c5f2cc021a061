"""Numpy forward pass of the point-to-field network and its checks."""
