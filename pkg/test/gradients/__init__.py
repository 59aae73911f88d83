"""This package tests the gradient baselines"""
