"""This package contains network math tests"""
