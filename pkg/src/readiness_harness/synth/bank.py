"""Multilingual template bank for synthetic support tickets.

Labels are never drawn on their own: queue and product area come from the
issue template, priority and escalation from the impact template. A ticket's
text always states the facts its labels were derived from.
"""

from __future__ import annotations

from dataclasses import dataclass

LANGUAGES = ("en", "pt", "es")
PRIORITIES = ("low", "medium", "high")


@dataclass(frozen=True)
class Issue:
    key: str
    queue: str
    product_area: str
    summary: dict[str, str]


@dataclass(frozen=True)
class Impact:
    key: str
    priority: str
    escalate: bool
    reason: str | None
    text: dict[str, str]


def _t(en: str, pt: str, es: str) -> dict[str, str]:
    return {"en": en, "pt": pt, "es": es}


ISSUES = (
    Issue("vpn_drop", "technical_support", "integrations",
          _t("VPN connection drops during data sync", "a conexao VPN cai durante a sincronizacao",
             "la conexion VPN se corta durante sincronizacion")),
    Issue("export_timeout", "technical_support", "reporting",
          _t("report export fails with a timeout", "a exportacao de relatorios falha por tempo esgotado",
             "la exportacion de reportes falla por tiempo de espera")),
    Issue("app_crash", "technical_support", "mobile",
          _t("mobile app closes when opening the dashboard", "o aplicativo movel fecha ao abrir o painel",
             "la aplicacion movil se cierra al abrir el panel")),
    Issue("double_charge", "billing", "payments",
          _t("invoice charged twice this month", "fatura cobrada duas vezes este mes",
             "factura cobrada dos veces este mes")),
    Issue("refund_delay", "billing", "payments",
          _t("refund not received after cancellation", "reembolso nao recebido apos o cancelamento",
             "reembolso no recibido tras la cancelacion")),
    Issue("plan_change", "billing", "subscriptions",
          _t("plan upgrade missing from the invoice", "mudanca de plano nao aparece na fatura",
             "el cambio de plan no aparece en la factura")),
    Issue("account_locked", "account_access", "identity",
          _t("account locked after failed sign-in attempts", "conta bloqueada apos tentativas de login",
             "cuenta bloqueada tras intentos de inicio de sesion")),
    Issue("mfa_code", "account_access", "identity",
          _t("two-factor code never arrives", "o codigo de dois fatores nunca chega",
             "el codigo de doble factor nunca llega")),
    Issue("sso_loop", "account_access", "integrations",
          _t("single sign-on redirects in a loop", "o login unico redireciona em loop",
             "el inicio de sesion unico redirige en bucle")),
    Issue("rate_limits", "general_inquiry", "documentation",
          _t("question about API rate limits", "duvida sobre limites de taxa da API",
             "consulta sobre limites de tasa de la API")),
    Issue("bulk_edit", "general_inquiry", "catalog",
          _t("request for bulk edit in the catalog", "pedido de edicao em massa no catalogo",
             "solicitud de edicion masiva en el catalogo")),
    Issue("data_copy", "general_inquiry", "compliance",
          _t("request for a copy of account data", "pedido de copia dos dados da conta",
             "solicitud de copia de los datos de la cuenta")),
)

IMPACTS = (
    Impact("outage", "high", True, "outage",
           _t("the whole team is blocked", "toda a equipe esta bloqueada", "todo el equipo esta bloqueado")),
    Impact("data_loss", "high", True, "data_loss",
           _t("records may have been lost", "registros podem ter sido perdidos",
              "es posible que se hayan perdido registros")),
    Impact("deadline", "high", False, None,
           _t("a customer deadline is at risk", "um prazo de cliente esta em risco",
              "un plazo de cliente esta en riesgo")),
    Impact("repeat_contact", "medium", True, "repeat_contact",
           _t("third contact about the same problem", "terceiro contato sobre o mesmo problema",
              "tercer contacto por el mismo problema")),
    Impact("slow_reports", "medium", False, None,
           _t("delays reports", "atrasa relatorios", "retrasa reportes")),
    Impact("slow_workaround", "medium", False, None,
           _t("a workaround exists but is slow", "existe uma alternativa, mas lenta",
              "existe una alternativa pero es lenta")),
    Impact("formal_complaint", "low", True, "formal_complaint",
           _t("customer asks for a formal complaint record", "cliente pede registro de reclamacao formal",
              "el cliente pide registro de queja formal")),
    Impact("cosmetic", "low", False, None,
           _t("minor inconvenience only", "apenas um pequeno incomodo", "solo una molestia menor")),
    Impact("no_impact", "low", False, None,
           _t("no immediate impact", "sem impacto imediato", "sin impacto inmediato")),
)

PERSISTENCE = {
    "en": ("The problem persists after a restart.", "It started after the latest update.",
           "It happens several times a day."),
    "pt": ("O problema persiste apos reiniciar.", "Comecou apos a ultima atualizacao.",
           "Acontece varias vezes ao dia."),
    "es": ("El problema persiste tras reiniciar.", "Empezo tras la ultima actualizacion.",
           "Ocurre varias veces al dia."),
}

SCOPE = {
    "en": "Affects {users} users for {days} days.",
    "pt": "Afeta {users} usuarios ha {days} dias.",
    "es": "Afecta a {users} usuarios desde hace {days} dias.",
}

INTRO = {"en": "Reported issue:", "pt": "Problema relatado:", "es": "Problema reportado:"}

FIELD_LABELS = {
    "en": ("Impact", "Channel", "Priority", "Product"),
    "pt": ("Impacto", "Canal", "Prioridade", "Produto"),
    "es": ("Impacto", "Canal", "Prioridad", "Producto"),
}

PRIORITY_WORDS = {
    "en": {"low": "low", "medium": "medium", "high": "high"},
    "pt": {"low": "baixa", "medium": "media", "high": "alta"},
    "es": {"low": "bajo", "medium": "medio", "high": "alto"},
}


@dataclass(frozen=True)
class TemplateBank:
    issues: tuple[Issue, ...] = ISSUES
    impacts: tuple[Impact, ...] = IMPACTS
    languages: tuple[str, ...] = LANGUAGES
    channels: tuple[str, ...] = ("chat", "email", "phone", "portal")
    requester_types: tuple[str, ...] = ("user", "admin", "partner")
    max_users: int = 250
    max_days: int = 30
    version: str = "v1"

    def values(self, dimension: str) -> tuple[str, ...]:
        if dimension == "queue":
            return tuple(dict.fromkeys(i.queue for i in self.issues))
        if dimension == "language":
            return self.languages
        if dimension == "priority":
            return tuple(dict.fromkeys(i.priority for i in self.impacts))
        if dimension == "escalation":
            return tuple(dict.fromkeys("true" if i.escalate else "false" for i in self.impacts))
        raise KeyError(dimension)

    def render(self, issue: Issue, impact: Impact, *, language: str, channel: str, persistence: int,
               users: int, days: int) -> tuple[str, str]:
        """Summary and description for one slot assignment."""
        summary = f"{issue.summary[language]} ({channel})"
        impact_l, channel_l, priority_l, product_l = FIELD_LABELS[language]
        description = " ".join([
            f"{INTRO[language]} {issue.summary[language]}.",
            PERSISTENCE[language][persistence],
            SCOPE[language].format(users=users, days=days),
            f"{impact_l}: {impact.text[language]}.",
            f"{channel_l}: {channel}.",
            f"{priority_l}: {PRIORITY_WORDS[language][impact.priority]}.",
            f"{product_l}: {issue.product_area}.",
        ])
        return summary, description


DEFAULT_BANK = TemplateBank()
