/** Panel state: one widget per bound property, refreshed from /status.
 *
 * The UI is never optimistic. A write puts its widget into `pending` and the
 * flag clears only once /status reflects the written value; on a rejected
 * write the flag clears immediately, a toast is raised and the widget keeps
 * showing whatever the gateway last reported. While a widget is pending,
 * further writes to it are refused (writes are serialized per widget). One
 * /status request is in flight at a time; failures raise the offline banner
 * and back the polling interval off exponentially without touching widgets.
 */

import { GatewayApi } from "./api.js";
import {
    ActuatorColor,
    GatewayStatus,
    ThermostatRule,
    ThresholdProperty,
} from "./types.js";

export type WidgetKind = "switch" | "slider" | "sensor-label" | "alarm-badge";

export interface WidgetState {
    key: string;
    kind: WidgetKind;
    binding: string; // gateway property URL
    value: unknown; // last value reflected by /status
    pending: boolean;
}

export interface SensorReading {
    temperature: number | null;
    stale: boolean;
    inAlarm: boolean;
}

interface PendingWrite {
    matches(status: GatewayStatus): boolean;
}

export const MAX_BACKOFF_MS = 8000;

export function actuatorKey(color: ActuatorColor): string {
    return `switch:${color}`;
}

export function sliderKey(deviceId: string, property: ThresholdProperty): string {
    return `slider:${deviceId}:${property}`;
}

export function labelKey(deviceId: string): string {
    return `label:${deviceId}`;
}

export const ALARM_BADGE_KEY = "alarm-badge";
export const THERMOSTAT_KEY = "thermostat-form";

export class PanelStore {
    widgets = new Map<string, WidgetState>();
    status: GatewayStatus | null = null;
    offline = false;
    toasts: string[] = [];
    thermostat: ThermostatRule | null = null;
    thermostatPending = false;

    private pendingWrites = new Map<string, PendingWrite>();
    private pollInFlight = false;
    private backoffMs = 0;
    private timer: ReturnType<typeof setTimeout> | null = null;
    private listeners = new Set<() => void>();

    constructor(
        private client: GatewayApi,
        public intervalMs = 1000,
    ) {}

    subscribe(listener: () => void): () => void {
        this.listeners.add(listener);
        return () => this.listeners.delete(listener);
    }

    private notify(): void {
        for (const listener of this.listeners) listener();
    }

    private toast(message: string): void {
        this.toasts.push(message);
        if (this.toasts.length > 5) this.toasts.shift();
    }

    takeToasts(): string[] {
        const out = this.toasts;
        this.toasts = [];
        return out;
    }

    // -- polling ---------------------------------------------------------------

    start(): void {
        if (this.timer !== null) return;
        const tick = async () => {
            await this.pollOnce();
            const delay = this.offline
                ? Math.max(this.intervalMs, this.backoffMs)
                : this.intervalMs;
            this.timer = setTimeout(tick, delay);
        };
        void tick();
    }

    stop(): void {
        if (this.timer !== null) {
            clearTimeout(this.timer);
            this.timer = null;
        }
    }

    async pollOnce(): Promise<void> {
        if (this.pollInFlight) return;
        this.pollInFlight = true;
        try {
            const status = await this.client.getStatus();
            this.offline = false;
            this.backoffMs = 0;
            this.applyStatus(status);
        } catch {
            // keep every widget as it was; just raise the banner and back off
            this.offline = true;
            this.backoffMs = Math.min(this.backoffMs === 0 ? this.intervalMs : this.backoffMs * 2, MAX_BACKOFF_MS);
        } finally {
            this.pollInFlight = false;
            this.notify();
        }
    }

    applyStatus(status: GatewayStatus): void {
        this.status = status;
        for (const device of status.devices) {
            this.upsert(labelKey(device.id), "sensor-label", `/1-wire/${device.id}/temperature`, {
                temperature: device.temperature,
                stale: device.stale,
                inAlarm: device.in_alarm,
            } satisfies SensorReading);
            this.upsert(
                sliderKey(device.id, "temphigh"),
                "slider",
                `/1-wire/${device.id}/temphigh`,
                device.temphigh,
            );
            this.upsert(
                sliderKey(device.id, "templow"),
                "slider",
                `/1-wire/${device.id}/templow`,
                device.templow,
            );
        }
        for (const color of ["red", "green"] as ActuatorColor[]) {
            this.upsert(actuatorKey(color), "switch", `/actuators/${color}`, status.actuators[color] ?? false);
        }
        this.upsert(ALARM_BADGE_KEY, "alarm-badge", "/1-wire/alarm/", [...status.alarm]);
        this.thermostat = status.thermostat;

        for (const [key, write] of [...this.pendingWrites]) {
            if (write.matches(status)) {
                this.pendingWrites.delete(key);
                if (key === THERMOSTAT_KEY) {
                    this.thermostatPending = false;
                } else {
                    const widget = this.widgets.get(key);
                    if (widget) widget.pending = false;
                }
            }
        }
    }

    private upsert(key: string, kind: WidgetKind, binding: string, value: unknown): void {
        const existing = this.widgets.get(key);
        if (existing) {
            existing.value = value;
        } else {
            this.widgets.set(key, { key, kind, binding, value, pending: false });
        }
    }

    // -- commands ----------------------------------------------------------------

    async setActuator(color: ActuatorColor, on: boolean): Promise<boolean> {
        const key = actuatorKey(color);
        return this.issue(key, () => this.client.putActuator(color, on), {
            matches: (status) => status.actuators[color] === on,
        });
    }

    async setThreshold(
        deviceId: string,
        property: ThresholdProperty,
        value: number,
    ): Promise<boolean> {
        const key = sliderKey(deviceId, property);
        return this.issue(key, () => this.client.putThreshold(deviceId, property, value), {
            matches: (status) =>
                status.devices.some((d) => d.id === deviceId && d[property] === value),
        });
    }

    async setThermostat(rule: ThermostatRule): Promise<boolean> {
        if (this.thermostatPending) return false;
        this.thermostatPending = true;
        this.pendingWrites.set(THERMOSTAT_KEY, {
            matches: (status) =>
                status.thermostat !== null &&
                status.thermostat.sensor === rule.sensor &&
                status.thermostat.actuator === rule.actuator &&
                status.thermostat.setpoint === rule.setpoint &&
                status.thermostat.hysteresis === rule.hysteresis &&
                status.thermostat.enabled === rule.enabled,
        });
        try {
            await this.client.putThermostat(rule);
            this.notify();
            return true;
        } catch (error) {
            this.thermostatPending = false;
            this.pendingWrites.delete(THERMOSTAT_KEY);
            this.toast(`thermostat write failed: ${String(error)}`);
            this.notify();
            return false;
        }
    }

    private async issue(
        key: string,
        send: () => Promise<void>,
        write: PendingWrite,
    ): Promise<boolean> {
        const widget = this.widgets.get(key);
        if (!widget || widget.pending) return false; // serialize writes per widget
        widget.pending = true;
        this.pendingWrites.set(key, write);
        try {
            await send();
            this.notify();
            return true;
        } catch (error) {
            // revert: drop the pending marker, keep the gateway-reported value
            widget.pending = false;
            this.pendingWrites.delete(key);
            this.toast(`write to ${widget.binding} failed: ${String(error)}`);
            this.notify();
            return false;
        }
    }
}
