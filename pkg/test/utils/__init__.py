"""This package tests seeding, checksum and parsing helpers"""
