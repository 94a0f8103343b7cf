"""
Unit tests for individual components of the finance integration dashboard.
"""
