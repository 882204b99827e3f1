/** Typed client for the gateway HTTP API.
 *
 * Every write goes through the documented endpoints and returns once the
 * gateway has queued it; confirmation comes later via /status polling.
 */

import { ActuatorColor, GatewayStatus, ThermostatRule, ThresholdProperty } from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class GatewayError extends Error {
    constructor(public status: number, message: string) {
        super(message);
    }
}

/** What the panel needs from the gateway; GatewayClient is the real one. */
export interface GatewayApi {
    getStatus(): Promise<GatewayStatus>;
    putActuator(color: ActuatorColor, on: boolean): Promise<void>;
    putThreshold(deviceId: string, property: ThresholdProperty, value: number): Promise<void>;
    putThermostat(rule: ThermostatRule): Promise<void>;
}

export class GatewayClient implements GatewayApi {
    private fetchFn: FetchLike;

    constructor(public baseUrl: string, fetchFn?: FetchLike) {
        this.fetchFn = fetchFn ?? ((input, init) => fetch(input, init));
    }

    private async request(path: string, init?: RequestInit): Promise<Response> {
        const response = await this.fetchFn(`${this.baseUrl}${path}`, init);
        if (!response.ok) {
            const body = await response.text().catch(() => "");
            throw new GatewayError(response.status, `${path}: ${response.status} ${body.trim()}`);
        }
        return response;
    }

    async getStatus(): Promise<GatewayStatus> {
        const response = await this.request("/status");
        return (await response.json()) as GatewayStatus;
    }

    async readProperty(path: string): Promise<string> {
        const response = await this.request(path);
        return (await response.text()).trim();
    }

    async putActuator(color: ActuatorColor, on: boolean): Promise<void> {
        await this.request(`/actuators/${color}`, {
            method: "PUT",
            body: on ? "on" : "off",
        });
    }

    async putThreshold(deviceId: string, property: ThresholdProperty, value: number): Promise<void> {
        await this.request(`/1-wire/${deviceId}/${property}`, {
            method: "PUT",
            body: String(value),
        });
    }

    async putThermostat(rule: ThermostatRule): Promise<void> {
        await this.request("/thermostat", {
            method: "PUT",
            headers: { "content-type": "application/json" },
            body: JSON.stringify(rule),
        });
    }
}
