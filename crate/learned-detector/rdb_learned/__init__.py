"""File interface of the learned occupancy detector."""
