# Integration tests module