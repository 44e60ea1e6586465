from producer.producer import DelegatorUnreachable, PackError, Producer, ProducerConfig, ProducerError

__all__ = ["Producer", "ProducerConfig", "ProducerError", "PackError", "DelegatorUnreachable"]
