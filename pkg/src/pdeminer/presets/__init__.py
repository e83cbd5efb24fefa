"""Shipped experiment configs, loaded with pdeminer.utils.config.load_preset"""
