"""Tests for rtpref"""
