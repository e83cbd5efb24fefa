"""Numerical building blocks: rational fit, optimizers, spectral solvers"""
