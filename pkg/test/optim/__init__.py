"""This package tests the perturbative optimizers"""
