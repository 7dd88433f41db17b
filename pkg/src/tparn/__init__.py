"""Triple-path attentive recurrent network for multichannel speech enhancement."""
