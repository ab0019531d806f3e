"""
Test suite for the concentrated-capacity lab.
"""
