"""This package tests loss landscapes and run statistics"""
