# Metrics: image quality, model evaluation and the augmentation experiment
from .quality import gaussian_window, inception_score, inception_score_from_probabilities, lpips_like, psnr, ssim
from .augmentation import (MODES, AccuracyTable, ExpressionClassifier, augment_to_count, augmentation_experiment,
                           train_classifier, traditional_augment)
from .evaluate import MetricsReport, evaluate_model, score_images

__all__ = ['gaussian_window', 'inception_score', 'inception_score_from_probabilities', 'lpips_like', 'psnr',
           'ssim', 'MODES', 'AccuracyTable', 'ExpressionClassifier', 'augment_to_count',
           'augmentation_experiment', 'train_classifier', 'traditional_augment', 'MetricsReport',
           'evaluate_model', 'score_images']
