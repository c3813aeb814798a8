"""
Servicios del Teaching Facade.

Este módulo contiene los servicios que el TeachingFacade orquesta: el modelo
del aprendiz, la reducción a 2D, las heurísticas, el análisis de regímenes,
el disparo, el optimizador con restricciones, los maestros óptimos y los
reportes.
"""
