"""Task heads that reuse the pre-trained pose encoder."""
