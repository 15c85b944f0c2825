"""Online inference on streams of thermal frames."""
