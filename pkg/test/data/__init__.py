"""This package tests the chaotic and XOR datasets"""
