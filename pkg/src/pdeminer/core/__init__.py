"""Differentiation engine, networks, training and sparse regression"""
