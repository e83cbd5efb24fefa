"""Run post-processing and invariant suites"""
