"""Implicit U-KAN 2.0: numpy segmentation network with SONO blocks and MultiKAN token mixing."""
