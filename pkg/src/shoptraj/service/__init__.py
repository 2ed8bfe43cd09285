"""HTTP collection service for recording human shopping sessions."""
