"""Test package for routh-dirac."""
