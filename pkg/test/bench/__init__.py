"""This package tests configuration, experiments and the command line"""
