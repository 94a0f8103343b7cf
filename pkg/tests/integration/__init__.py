"""
Integration tests for the finance integration dashboard.
These tests focus on testing complete features and user interactions.
"""
