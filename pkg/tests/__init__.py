"""sparse_fgam testing suite"""
